use twinsec::attack::AttackPhase;
use twinsec::harness::{
    builtin, builtin_source, parse_scenario, simulate, ActionSpec, Program, RuleSpec, ScenarioError, ScheduledTwist,
};
use twinsec::plant::{PlantKind, ViolationKind};

fn validation_field(src: &str) -> String {
    match parse_scenario(src) {
        Err(ScenarioError::Validation { field, .. }) => field,
        other => panic!("expected a validation error, got {other:?}"),
    }
}

fn edited(edit: impl FnOnce(&mut serde_json::Value)) -> String {
    let mut v: serde_json::Value = serde_json::from_str(builtin_source("turtlebot_pitm").unwrap()).unwrap();
    edit(&mut v);
    v.to_string()
}

#[test]
fn builtins_describe_the_two_case_studies() {
    let tb = builtin("turtlebot_pitm").unwrap();
    assert_eq!(tb.plant.kind, PlantKind::Drive);
    assert_eq!(tb.topics[0].name, "/cmd_vel");
    let a = tb.attack.as_ref().unwrap();
    assert_eq!(a.rules, vec![RuleSpec { path: "linear.x".into(), action: ActionSpec::Set(1.5) }]);
    let Program::Twist(t) = &tb.topics[0].program else { panic!("expected twist program") };
    assert_eq!(t.linear, [1.0, 0.0, 0.0]);

    let ur = builtin("ur10_pitm").unwrap();
    assert_eq!(ur.plant.kind, PlantKind::Arm);
    assert_eq!(ur.topics[0].type_name, "control_msgs/FollowJointTrajectoryActionGoal");
    let rule = &ur.attack.as_ref().unwrap().rules[0];
    assert_eq!(rule.path, "goal.trajectory.points[0].positions[2]");
    assert!(matches!(rule.action, ActionSpec::OverrideStream { .. }));
    assert!(builtin("nope").is_none());
}

#[test]
fn cross_references_are_checked() {
    assert_eq!(validation_field(&edited(|v| v["attack"]["attacker"] = "mallory".into())), "attack.attacker");
    assert_eq!(validation_field(&edited(|v| v["attack"]["victim_b"] = "nobody".into())), "attack.victim_b");
    assert_eq!(validation_field(&edited(|v| v["topics"][0]["publisher"] = "ghost".into())), "topics[0].publisher");
    assert_eq!(validation_field(&edited(|v| v["plant"]["topic"] = "/nope".into())), "plant.topic");
    assert_eq!(validation_field(&edited(|v| v["duration_s"] = 0.0.into())), "duration_s");
    assert_eq!(
        validation_field(&edited(|v| v["attack"]["rules"][0]["path"] = "linear.w".into())),
        "attack.rules[0]"
    );
    assert_eq!(
        validation_field(&edited(|v| v["envelope"]["exclusion_zone"] =
            serde_json::json!({"joint": "shoulder_pan_joint", "lo": 1.0, "hi": 2.0}))),
        "envelope"
    );
    assert_eq!(validation_field(&edited(|v| v["master"] = "ghost".into())), "master");
}

#[test]
fn parse_errors_carry_positions_and_unknown_keys_fail() {
    match parse_scenario("{\n  \"name\": \"x\",\n  oops\n}") {
        Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected parse error, got {other:?}"),
    }
    let extra = edited(|v| v["plant"]["colour"] = "red".into());
    assert!(matches!(parse_scenario(&extra), Err(ScenarioError::Parse { .. })));
}

#[test]
fn absent_victim_aborts_without_diverting_anything() {
    let src = edited(|v| v["attack"]["victim_b"] = "10.0.0.99".into());
    let s = parse_scenario(&src).unwrap();
    let out = simulate(&s).unwrap();
    let a = out.report.attack.unwrap();
    assert_eq!(a.phase, AttackPhase::Aborted);
    assert!(a.error.unwrap().contains("10.0.0.99"));
    assert_eq!(a.counters.seen, 0);
    assert!(out.trace.iter().all(|r| r.to.as_deref() != Some("attacker") || r.kind != twinsec::netsim::FrameKind::Stream));
    assert!(out.report.safety.max_divergence <= 1e-9);
}

#[test]
fn identity_attack_changes_nothing_but_timing() {
    let mut s = builtin("turtlebot_pitm").unwrap();
    s.attack.as_mut().unwrap().rules.clear();
    let out = simulate(&s).unwrap();
    let a = out.report.attack.as_ref().unwrap();
    assert!(a.counters.seen >= 100);
    assert_eq!(a.counters.mutated, 0);
    assert_eq!(a.counters.matched, a.counters.seen);
    assert!(out.report.safety.max_divergence <= 1e-9);
    assert!(out.report.safety.first_violation.is_none());
    assert!(out.trace.iter().filter_map(|r| r.pitm.as_deref()).all(|p| p == "target-unchanged"));
}

#[test]
fn attacked_drive_counts_line_up() {
    let out = simulate(&builtin("turtlebot_pitm").unwrap()).unwrap();
    let a = out.report.attack.as_ref().unwrap();
    assert!(a.counters.seen >= 100);
    assert_eq!(a.counters.matched, a.counters.seen);
    assert_eq!(a.counters.mutated, a.counters.matched);
    assert_eq!(a.counters.forwarded, a.counters.seen);
    let mutated_frames = out.trace.iter().filter(|r| r.pitm.as_deref() == Some("target-mutated")).count();
    assert_eq!(mutated_frames as u64, a.counters.mutated);
    assert_eq!(out.report.safety.first_violation.unwrap().kind, ViolationKind::VelocityLimit);
}

#[test]
fn attack_window_ends_with_restored_caches() {
    let mut s = builtin("turtlebot_pitm").unwrap();
    s.attack.as_mut().unwrap().stop_s = Some(5.0);
    let out = simulate(&s).unwrap();
    let a = out.report.attack.as_ref().unwrap();
    assert_eq!(a.phase, AttackPhase::Stopped);
    // roughly half the commands were rewritten
    assert!((45..=50).contains(&a.counters.mutated), "{}", a.counters.mutated);
    let late = out
        .trace
        .iter()
        .filter(|r| r.t > 5_100_000_000 && r.kind == twinsec::netsim::FrameKind::Stream)
        .all(|r| r.to.as_deref() == Some("cps"));
    assert!(late);
    // the robot ran 1.5 m/s for about 4.8 s, then 1.0 m/s again
    let d = out.report.safety.max_divergence;
    assert!((d - 2.4).abs() < 0.05, "{d}");
}

#[test]
fn command_timeout_stops_a_starved_robot() {
    let mut s = builtin("turtlebot_pitm").unwrap();
    s.attack = None;
    s.plant.command_timeout_s = Some(0.5);
    s.topics[0].program = Program::TwistSchedule(vec![ScheduledTwist {
        at_s: 0.0,
        linear: [1.0, 0.0, 0.0],
        angular: [0.0; 3],
    }]);
    s.topics[0].rate_hz = 10.0;
    let out = simulate(&s).unwrap();
    assert!(out.report.safety.max_divergence <= 1e-9);
    assert!((out.report.final_cps[0] - 10.0).abs() < 1e-9);
}

#[test]
fn scheduled_twist_drives_both_twins() {
    let mut s = builtin("turtlebot_pitm").unwrap();
    s.attack = None;
    s.topics[0].program = Program::TwistSchedule(vec![
        ScheduledTwist { at_s: 0.0, linear: [1.0, 0.0, 0.0], angular: [0.0; 3] },
        ScheduledTwist { at_s: 5.0, linear: [0.0, 0.0, 0.0], angular: [0.0, 0.0, 0.5] },
    ]);
    let out = simulate(&s).unwrap();
    assert!(out.report.safety.max_divergence <= 1e-9);
    let fin = &out.report.final_cps;
    assert!((fin[0] - 4.81).abs() < 0.02, "{fin:?}");
    assert!(fin[2] > 2.0);
}

#[test]
fn single_goal_is_sent_once() {
    let mut s = builtin("ur10_pitm").unwrap();
    s.topics[0].count = Some(1);
    let out = simulate(&s).unwrap();
    let a = out.report.attack.as_ref().unwrap();
    assert_eq!((a.counters.matched, a.counters.mutated), (1, 1));
    // one 0.2 rad hijack, far short of the zone
    assert!((out.report.final_cps[2] - 0.2).abs() < 1e-12);
    assert!(out.report.safety.first_violation.is_none());
    let mut zero = builtin("ur10_pitm").unwrap();
    zero.topics[0].count = Some(0);
    assert!(matches!(zero.validate(), Err(ScenarioError::Validation { field, .. }) if field == "topics[0].count"));
}
