use latile_core::probe::{adjust_stride, chase, ELEMENT_BYTES};
use latile_core::{generate_chase, PatternKind, SweepConfig};
use proptest::prelude::*;

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pattern() -> impl Strategy<Value = PatternKind> {
    prop_oneof![Just(PatternKind::Cyclic), Just(PatternKind::Sawtooth)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn chase_is_one_cycle_through_every_slot(len in 2usize..5000, stride in 1usize..300, p in pattern()) {
        let buf = generate_chase(len, p, stride).unwrap();
        let slots = buf.slots();
        let mut hit = vec![false; len];
        for &s in slots {
            prop_assert!(s < len);
            prop_assert!(!hit[s], "slot {} targeted twice", s);
            hit[s] = true;
        }
        let mut at = 0;
        for step in 1..=len {
            at = slots[at];
            if at == 0 {
                prop_assert_eq!(step, len);
            }
        }
        prop_assert_eq!(at, 0);
        prop_assert_eq!(chase(slots, 0, len), 0);
    }

    #[test]
    fn adjusted_stride_is_coprime_and_not_a_power_of_two(len in 2usize..100_000, stride in 2usize..1000) {
        let s = adjust_stride(len, stride).unwrap();
        prop_assert!(s >= stride);
        prop_assert_eq!(gcd(s, len), 1);
        prop_assert!(!s.is_power_of_two());
        for smaller in stride..s {
            prop_assert!(smaller.is_power_of_two() || gcd(smaller, len) != 1);
        }
    }

    #[test]
    fn cyclic_visits_in_stride_order(len in 2usize..2000, stride in 2usize..50) {
        let buf = generate_chase(len, PatternKind::Cyclic, stride).unwrap();
        let step = buf.stride_elems() % len;
        let order: Vec<usize> = buf.visit_order().collect();
        for (k, &v) in order.iter().enumerate() {
            prop_assert_eq!(v, (k * step) % len);
        }
    }

    #[test]
    fn sawtooth_mirrors_the_second_half(len in 2usize..2000, stride in 2usize..50) {
        let c: Vec<usize> = generate_chase(len, PatternKind::Cyclic, stride).unwrap().visit_order().collect();
        let s: Vec<usize> = generate_chase(len, PatternKind::Sawtooth, stride).unwrap().visit_order().collect();
        let half = len.div_ceil(2);
        prop_assert_eq!(&s[..half], &c[..half]);
        let mut back = c[half..].to_vec();
        back.reverse();
        prop_assert_eq!(&s[half..], &back[..]);
    }

    #[test]
    fn ladder_is_strictly_increasing_and_bounded(
        min_exp in 6u32..14,
        span in 0u32..10,
        ppo in 1usize..9,
        stride in 1usize..20,
    ) {
        let cfg = SweepConfig {
            min_bytes: 1 << min_exp,
            max_bytes: 1 << (min_exp + span),
            points_per_octave: ppo,
            stride_elems: stride,
            ..SweepConfig::default()
        };
        let ladder = cfg.ladder();
        prop_assert!(!ladder.is_empty());
        for w in ladder.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for &s in &ladder {
            prop_assert_eq!(s % ELEMENT_BYTES, 0);
            prop_assert!(s <= cfg.max_bytes);
        }
    }
}

#[test]
fn too_short_and_zero_stride_are_rejected() {
    assert!(generate_chase(1, PatternKind::Cyclic, 7).is_err());
    assert!(generate_chase(100, PatternKind::Cyclic, 0).is_err());
}

#[test]
fn single_point_ladder_when_bounds_meet() {
    let cfg = SweepConfig {
        min_bytes: 4096,
        max_bytes: 4096,
        ..SweepConfig::default()
    };
    assert_eq!(cfg.ladder().len(), 1);
}
