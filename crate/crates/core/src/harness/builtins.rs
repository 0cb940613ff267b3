use super::scenario::{parse_scenario, Scenario};

const BUILTINS: [(&str, &str); 2] = [
    ("turtlebot_pitm", include_str!("../../scenarios/turtlebot_pitm.json")),
    ("ur10_pitm", include_str!("../../scenarios/ur10_pitm.json")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}

pub fn builtin_source(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses an embedded scenario. Panics only if an embedded file is broken.
pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_source(name).map(|src| parse_scenario(src).unwrap_or_else(|e| panic!("builtin {name}: {e}")))
}
