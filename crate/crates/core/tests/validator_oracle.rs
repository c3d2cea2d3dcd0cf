//! Plausibility validator against an independent restatement of the rules.

mod common;

use std::collections::BTreeSet;

use common::*;
use sandbox_core::persona::{validate_persona, Persona, RuleId};

#[test]
fn template_personas_pass_clean() {
    for p in [day_persona(), night_persona()] {
        let r = validate_persona(&p);
        assert!(r.ok && r.violations.is_empty(), "{}: {:?}", p.id, r.violations);
        assert!(oracle_rules(&as_value(&p)).is_empty());
    }
}

#[test]
fn each_fixture_flags_exactly_its_rule() {
    for rule in RuleId::ALL {
        let p = one_violation(rule);
        let report = validate_persona(&p);
        assert!(!report.ok, "{rule}");
        assert_eq!(report.rules_flagged(), vec![rule], "{rule}: {:?}", report.violations);
        assert_eq!(oracle_rules(&as_value(&p)), BTreeSet::from([rule]));
    }
}

#[test]
fn fixture_files_match_builders() {
    for rule in RuleId::ALL {
        let p = one_violation(rule);
        let path = fixture_dir().join(format!("personas/{}.json", p.id));
        assert_golden(&path, &p.to_canonical_json());
        let loaded = Persona::load(&path).unwrap();
        assert_eq!(validate_persona(&loaded).rules_flagged(), vec![rule]);
    }
}

#[test]
fn agrees_with_oracle_on_random_mutations() {
    let mut rng = rng(41);
    let bases = [day_persona(), night_persona()];
    let mut flagged = BTreeSet::new();
    for i in 0..2000 {
        let base = if i % 3 == 0 { random_persona(&mut rng) } else { bases[i % 2].clone() };
        let p = mutate_persona(&base, &mut rng);
        let got: BTreeSet<RuleId> = validate_persona(&p).rules_flagged().into_iter().collect();
        let want = oracle_rules(&as_value(&p));
        assert_eq!(got, want, "case {i}: {}", p.to_canonical_json());
        flagged.extend(got);
    }
    assert_eq!(flagged.len(), 5, "mutations should exercise every rule");
}

#[test]
fn generated_personas_are_plausible() {
    let mut rng = rng(7);
    for _ in 0..200 {
        let p = random_persona(&mut rng);
        let r = validate_persona(&p);
        assert!(r.ok, "{}: {:?}", p.id, r.violations);
        assert!(oracle_rules(&as_value(&p)).is_empty(), "{}", p.id);
    }
}
