//! Count DAGs and show the two-node universe.

use abcd::dag::enumerate_dags;

fn main() -> abcd::Result<()> {
    for d in 1..=5 {
        println!("d = {d}: {} graphs", enumerate_dags(d)?.len());
    }
    for g in enumerate_dags(2)? {
        println!("{:?}", g.edges());
    }
    Ok(())
}
