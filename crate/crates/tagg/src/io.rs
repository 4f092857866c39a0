//! The game and profile document formats.
//!
//! Games are stored as JSON with top-level keys `players`, `duration`,
//! `actions`, `chance_vars`, `decisions`, `utilities`; conditional tables and
//! utility tables are flat rows in lexicographic parent-configuration order
//! with the last parent varying fastest. Serialization is canonical: object
//! keys sorted, fractional numbers printed with 17 significant digits, so
//! that parse(serialize(g)) reproduces g exactly and serialization is
//! byte-stable.

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{BehaviorProfile, TaggGame};

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses and validates a game document.
pub fn parse_game(text: &str) -> Result<TaggGame> {
    let game: TaggGame = serde_json::from_str(text).map_err(parse_error)?;
    game.ensure_valid()?;
    Ok(game)
}

/// Canonical text encoding of a game.
pub fn serialize_game(game: &TaggGame) -> Result<String> {
    let value = serde_json::to_value(game).map_err(parse_error)?;
    let mut out = String::new();
    write_canonical(&value, &mut out);
    out.push('\n');
    Ok(out)
}

/// Parses a profile document; callers validate it against a game.
pub fn parse_profile(text: &str) -> Result<BehaviorProfile> {
    serde_json::from_str(text).map_err(parse_error)
}

pub fn serialize_profile(profile: &BehaviorProfile) -> Result<String> {
    let value = serde_json::to_value(profile).map_err(parse_error)?;
    let mut out = String::new();
    write_canonical(&value, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                // 17 significant digits round-trip any binary64 value
                let x = n.as_f64().unwrap_or(0.0);
                out.push_str(&format!("{:.16e}", x));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string encoding cannot fail"));
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string encoding cannot fail"));
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_tollbooth, TollboothSpec};
    use crate::model::{BehaviorProfile, ChanceVariable, ConfigValue, StrategyRule};
    use proptest::prelude::*;

    #[test]
    fn tollbooth_round_trips() {
        let g = make_tollbooth(&TollboothSpec::new(3, 2, 3)).unwrap();
        let text = serialize_game(&g).unwrap();
        let back = parse_game(&text).unwrap();
        assert_eq!(g, back);
        // canonical form is stable
        assert_eq!(serialize_game(&back).unwrap(), text);
    }

    #[test]
    fn chance_and_rules_round_trip() {
        let mut g = make_tollbooth(&TollboothSpec::new(2, 2, 1)).unwrap();
        g.chance_vars.push(ChanceVariable {
            id: "fog".into(),
            domain: vec!["clear".into(), "thick".into()],
            parents: vec![],
            time: 0,
            cpt: vec![vec![0.75, 0.25]],
        });
        let text = serialize_game(&g).unwrap();
        assert_eq!(parse_game(&text).unwrap(), g);

        let mut p = BehaviorProfile::uniform(&g);
        let mut ctx = std::collections::BTreeMap::new();
        ctx.insert("L1".to_string(), ConfigValue::Count(1));
        ctx.insert("L2".to_string(), ConfigValue::Count(0));
        p.strategies.get_mut("w2c1").unwrap().rules.push(StrategyRule {
            context: ctx,
            dist: vec![1.0 / 3.0, 2.0 / 3.0],
        });
        let ptext = serialize_profile(&p).unwrap();
        let pback = parse_profile(&ptext).unwrap();
        assert_eq!(p, pback);
        assert!(pback.validate(&g).is_valid());
    }

    #[test]
    fn missing_duration_names_the_key() {
        let err = parse_game(r#"{"players": 1, "actions": ["a"], "decisions": []}"#);
        match err {
            Err(Error::Parse { message, .. }) => assert!(message.contains("duration")),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_cpt_row_is_a_validation_error() {
        let mut g = make_tollbooth(&TollboothSpec::new(2, 1, 1)).unwrap();
        g.chance_vars.push(ChanceVariable {
            id: "X".into(),
            domain: vec!["a".into(), "b".into()],
            parents: vec![],
            time: 0,
            cpt: vec![vec![0.6, 0.3]],
        });
        let text = serialize_game(&g).unwrap();
        match parse_game(&text) {
            Err(Error::InvalidGame { first, .. }) => assert!(first.contains("sums to")),
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        match parse_game("{\n  \"players\": 1,\n  !") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn prop_float_formatting_round_trips(x in proptest::num::f64::NORMAL) {
            let s = format!("{:.16e}", x);
            let back: f64 = s.parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
