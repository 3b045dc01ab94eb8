//! Runs the randomized fast-vs-dense equivalence suites: the element-wise
//! solver updates against brute-force dense solves of the same normal
//! equations on tiny instances, plus the structural identities they rely on.
//!
//! Run with: `cargo run --example oracle_equivalence`

fn main() -> sdi::Result<()> {
    let all_pass = sdi::cli::cmd_verify(0, 100, std::io::stdout().lock())?;
    assert!(all_pass);
    Ok(())
}
