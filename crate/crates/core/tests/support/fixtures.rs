//! Qualitative examples: `(trace, prediction, expected holds)`, with
//! repeated `X` runs written out.

#![allow(dead_code)]

pub fn xs(n: usize) -> String {
    "X".repeat(n)
}

pub fn qualitative() -> Vec<(&'static str, String, bool)> {
    vec![
        ("&a!e;e;d;{1}", "&UaeXXd".into(), true),
        ("1;b;&de;c;{1}", "X&bX&&deXc".into(), true),
        ("&b!d;{b}", "&!d!U1!b".into(), true),
        ("1;&&a!c!e;{a}", "X&&!c!e!U1!a".into(), true),
        ("1;&&a!c!e;{a}", "&X!U1!aX&!c!e".into(), true),
        ("1;!b;{1}", format!("!&Xb{}a", xs(30)), true),
        ("1;b;e;{1}", format!("&XbXXU!{}be", xs(25)), true),
        ("!c;&!c!d;&c!d;!b;!b;{1}", "&!U!cXdXXX!UXbb".into(), false),
        ("!c;&!c!d;&c!d;!b;!b;{1}", "&UX!dc!XXXUXbb".into(), true),
        ("1;1;c;{1}", format!("XXU{}cXc", xs(30)), false),
        ("1;1;c;{1}", format!("XXU{}!ac", xs(25)), true),
    ]
}
