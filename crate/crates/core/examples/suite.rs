//! The quick suite (planar criteria only), one line per criterion.
use bmk::suite::{run_suite, SuiteName};

fn main() {
    let results = run_suite(SuiteName::Quick, 0);
    for r in &results {
        println!("{}", r.line());
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} passed", results.len());
}
