//! Acceptance gate: every criterion of the reproduction suite, one line each.

use scatterlab_cli::suite::{run_suite, SuiteOptions};

#[test]
fn acceptance() {
    let opts = SuiteOptions::new(0);
    let mut failures = Vec::new();
    let report = run_suite(&opts, |c, elapsed, budget| {
        let ok = c.passed && elapsed <= budget;
        println!(
            "[{}] C{:02} {:<18} {:>8.2}s (budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        for k in &c.checks {
            println!("        {} {} = {} ({})", if k.passed { "ok  " } else { "FAIL" }, k.label, k.value, k.bound);
        }
        if let Some(e) = &c.error {
            println!("        error: {e}");
        }
        if !ok {
            failures.push(c.name.clone());
        }
    });
    assert_eq!(report.criteria.len(), 12);
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}
