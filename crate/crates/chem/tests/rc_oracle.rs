//! Reaction centers checked against an independent key-based oracle.

mod oracle;

#[test]
fn centers_match_bruteforce_oracle() {
    assert!(oracle::corpus().len() >= 200);
    let checked = oracle::check_corpus(9).unwrap();
    assert!(checked >= 400);
}
