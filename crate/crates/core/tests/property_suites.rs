//! Fast property suites: finite differences, expansion equivalence, option
//! immutability, the enumeration oracle, sampling frequencies, resumable
//! checkpoints and loader fixtures.

mod support;

use support::Check;

fn assert_check(name: &str, check: Check) {
    match check {
        Ok(summary) => println!("{name}: {summary}"),
        Err(e) => panic!("{name}: {e}"),
    }
}

#[test]
fn backward_kernels_match_finite_differences() {
    assert_check("backward kernels", support::check_a_backward_kernels());
}

#[test]
fn preactivation_gradient_and_score_assembly() {
    assert_check("pre-activation", support::check_b_preactivation());
}

#[test]
fn expansion_matches_slot_forward_on_all_architectures() {
    assert_check("expansion", support::check_c_expansion());
}

#[test]
fn options_never_change_during_training() {
    assert_check("option digest", support::check_d_digest());
}

#[test]
fn greedy_selection_ranks_in_top_decile() {
    assert_check("oracle", support::check_e_oracle());
}

#[test]
fn sampling_frequencies_follow_softmax() {
    assert_check("sampling", support::check_f_ps_frequencies());
}

#[test]
fn checkpoint_resume_is_bit_exact() {
    assert_check("resume", support::check_g_resume());
}

#[test]
fn loaders_round_trip_and_reject_malformed_input() {
    assert_check("loaders", support::check_h_loaders());
}
