use bose_bounds_cli::suite::{Budget, Suite};

fn main() {
    let strict = std::env::var("BOSE_BOUNDS_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let suite = Suite::new(Budget::Full, 1);
    let mut failed = 0;
    let mut errored = 0;
    for id in 1..=9 {
        let c = suite.run(id);
        println!(
            "criterion {id} [{}] {}: {} ({:.1} s)",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.summary,
            c.seconds
        );
        if !c.passed {
            failed += 1;
            if c.summary.starts_with("error:") {
                errored += 1;
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if errored > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
