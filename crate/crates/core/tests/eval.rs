use std::time::Instant;

use nesy_core::eval::*;
use nesy_core::rag::Corpus;

#[test]
fn every_recorded_tuple_has_a_plan() {
    for p in &PROFILES {
        for row in &p.samples {
            for &t in row {
                let plan = plan_attempts(t, 3).unwrap_or_else(|| panic!("{} {t:?}", p.name));
                assert_eq!(plan.len() as u32, t.0);
                assert_eq!(plan.iter().filter(|a| a.revise).count() as u32, t.1);
                assert_eq!(plan.iter().filter(|a| a.syntax_error).count() as u32, t.2);
            }
        }
    }
}

#[test]
fn impossible_tuples_have_no_plan() {
    // An early attempt that passes would end the loop.
    assert_eq!(plan_attempts((2, 0, 0), 3), None);
    // A passing final attempt cannot also fail the check.
    assert_eq!(plan_attempts((2, 0, 2), 3), None);
    assert_eq!(plan_attempts((4, 0, 0), 3), None);
    assert_eq!(plan_attempts((0, 0, 0), 3), None);
    assert!(plan_attempts((3, 3, 3), 3).is_some());
}

#[test]
fn scripted_runs_reproduce_their_targets() {
    let corpus = Corpus::seed();
    let started = Instant::now();
    let runs = evaluate(&corpus, profile("gpt-5-low").unwrap(), 3, 4).unwrap();
    assert!(started.elapsed().as_secs() < 60);
    assert_eq!(runs.len(), 36);
    for r in &runs {
        // A run whose last draft still fails the check cannot export.
        let broken_final = r.target.0 == 3 && r.target.2 == 3;
        assert_eq!(r.status == "done", !broken_final, "{r:?}");
        assert!(r.matches_target(), "{r:?}");
    }
    let order: Vec<(usize, usize)> = runs.iter().map(|r| (r.task, r.sample)).collect();
    let expected: Vec<(usize, usize)> = (1..=12).flat_map(|t| (1..=3).map(move |s| (t, s))).collect();
    assert_eq!(order, expected);

    let table = summary_table("GPT-5 (Low)", &runs);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("GPT-5 (Low)"));
    assert!(lines[1].contains("(1,0,0)") && lines[1].contains("(3,3,0)"));
    assert!(lines[3].trim_start().starts_with("S3"));
}

#[test]
fn job_count_does_not_change_results() {
    let corpus = Corpus::seed();
    let p = profile("deepseek-r1").unwrap();
    assert_eq!(evaluate(&corpus, p, 2, 1).unwrap(), evaluate(&corpus, p, 2, 5).unwrap());
}
