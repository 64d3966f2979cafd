mod common;

use common::props::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(config(32))]

    #[test]
    fn generator_rows(c in case_strategy()) {
        generator_rows_sum_to_zero(&c)?;
    }

    #[test]
    fn mirroring(c in case_strategy(), q1 in 1u32..=4, q2 in 1u32..=4, p in -5i32..=5) {
        mirroring_is_an_involution(&c, q1, q2, p)?;
    }

    #[test]
    fn fill_conservation(c in case_strategy(), raw in raw_agent()) {
        fills_conserve_volume_and_cash(&c, raw)?;
    }

    #[test]
    fn policy_dominance(c in case_strategy()) {
        optimum_dominates_fixed_rules(&c)?;
    }

    #[test]
    fn boundary_conditions(c in case_strategy()) {
        terminal_and_execution_boundaries(&c)?;
    }

    #[test]
    fn seed_determinism(c in case_strategy(), seed in any::<u64>()) {
        simulation_is_a_function_of_the_seed(&c, seed)?;
    }
}
