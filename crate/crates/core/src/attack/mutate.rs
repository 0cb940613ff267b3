use crate::wire::{decode_message, encode_message, MessageSchema};

use super::{AttackError, MutationRule};

/// Decodes a length-prefixed message, applies `rules` in order and
/// re-encodes it. `k` is the 1-based index of this message among those
/// intercepted on the target topic.
pub fn mutate(schema: &MessageSchema, msg: &[u8], rules: &[MutationRule], k: u64) -> Result<Vec<u8>, AttackError> {
    let mut value = decode_message(schema, msg)?;
    for rule in rules {
        rule.apply(&mut value, k)?;
    }
    Ok(encode_message(schema, &value)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attack::MutationAction;
    use crate::wire::{builtin_schemas, FieldPath, FieldValue, TWIST};

    fn twist_bytes(lx: f64, az: f64) -> Vec<u8> {
        let v3 = |x, z| {
            FieldValue::record([
                ("x", FieldValue::Float64(x)),
                ("y", FieldValue::Float64(0.0)),
                ("z", FieldValue::Float64(z)),
            ])
        };
        let v = FieldValue::record([("linear", v3(lx, 0.0)), ("angular", v3(0.0, az))]);
        encode_message(&builtin_schemas().lookup(TWIST).unwrap(), &v).unwrap()
    }

    #[test]
    fn set_linear_x_leaves_rest_untouched() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let input = twist_bytes(1.0, 0.25);
        let rule = MutationRule::new("linear.x", MutationAction::Set(1.5)).unwrap();
        let out = mutate(&schema, &input, &[rule], 1).unwrap();
        assert_eq!(out, twist_bytes(1.5, 0.25));
        assert_eq!(&out[..4], &input[..4]);
        assert_eq!(&out[12..], &input[12..]);
    }

    #[test]
    fn unit_scale_is_identity() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let input = twist_bytes(0.7, -0.3);
        let rule = MutationRule::new("linear.x", MutationAction::Scale(1.0)).unwrap();
        assert_eq!(mutate(&schema, &input, &[rule], 1).unwrap(), input);
    }

    #[test]
    fn add_and_override_stream() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let input = twist_bytes(1.0, 0.0);
        let add = MutationRule::new("angular.z", MutationAction::Add(0.5)).unwrap();
        let ovr = MutationRule::new("linear.x", MutationAction::OverrideStream { start: 0.0, step: 0.2 }).unwrap();
        let out = mutate(&schema, &input, &[add, ovr], 3).unwrap();
        let expected = twist_bytes(0.2 * 3.0, 0.5);
        assert_eq!(out, expected);
    }

    #[test]
    fn unresolved_path_is_an_error() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let rule = MutationRule {
            path: "linear.w".parse::<FieldPath>().unwrap(),
            action: MutationAction::Set(1.0),
        };
        assert!(matches!(
            mutate(&schema, &twist_bytes(1.0, 0.0), std::slice::from_ref(&rule), 1),
            Err(AttackError::PathUnresolved(_))
        ));
        assert!(rule.validate(&schema).is_err());
        let bad_operand = MutationRule::new("linear.x", MutationAction::Scale(f64::INFINITY)).unwrap();
        assert!(matches!(bad_operand.validate(&schema), Err(AttackError::InvalidPlan(_))));
    }

    #[test]
    fn undecodable_input_is_an_error() {
        let schema = builtin_schemas().lookup(TWIST).unwrap();
        let rule = MutationRule::new("linear.x", MutationAction::Set(1.5)).unwrap();
        assert!(matches!(mutate(&schema, &[1, 2, 3], &[rule], 1), Err(AttackError::Wire(_))));
    }
}
