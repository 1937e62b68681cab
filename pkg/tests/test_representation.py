import numpy as np
import pytest

from privbound import (
    DomainError,
    FunctionAtomSpace,
    JointDistribution,
    Mechanism,
    Scenario,
    SearchConfig,
    efrl,
    esfrl,
    family_bsc,
    family_erasure,
    family_function,
    frl,
    g0,
    improve,
    random_joint,
    report,
    saturate_leakage,
    sfrl_search,
    time_share,
)
from privbound.bounds import lower_L1, psi_lower, sfrl_constant
from privbound.distribution import (
    binary_entropy,
    conditional_entropy,
    entropy,
    mixing_weight,
    mutual_information,
    row_entropies,
)
from privbound.representation import as_hidden, interval_refinement, mix_with_x

from conftest import ref_h, ref_triple

FAST = SearchConfig(restarts=1, max_iters=40)


def random_joints(seed, count, sizes=(2, 3, 4)):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_joint(rng, int(rng.choice(sizes)), int(rng.choice(sizes)))


# --- config ----------------------------------------------------------------

def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(restarts=0)
    with pytest.raises(ValueError):
        SearchConfig(tol=0.0)


def test_search_config_streams_are_independent():
    cfg = SearchConfig(seed=5)
    assert cfg.rng(0).random() == SearchConfig(seed=5).rng(0).random()
    assert cfg.rng(0).random() != cfg.rng(1).random()


# --- interval refinement and frl ------------------------------------------

def test_interval_refinement_bsc():
    xs, lengths, labels = interval_refinement(family_bsc(0.2).p)
    assert xs.tolist() == [0, 1]
    # breakpoints at 0.2 and 0.8
    assert lengths.tolist() == pytest.approx([0.2, 0.6, 0.2])
    assert labels.tolist() == [[0, 0], [0, 1], [1, 1]]


def test_interval_refinement_merges_identical_labels():
    # x=0 splits at 0.5; x=1 at 0.25, 0.75 over three symbols
    p = np.array([[0.25, 0.0, 0.25], [0.125, 0.25, 0.125]])
    xs, lengths, labels = interval_refinement(p)
    assert lengths.sum() == pytest.approx(1.0)
    assert len({tuple(r) for r in labels}) == len(labels)


def test_frl_on_independent_pair_recovers_y():
    j = JointDistribution(np.outer([0.4, 0.6], [0.1, 0.2, 0.7]))
    rep = report(j, frl(j))
    assert rep.utility == pytest.approx(entropy(j.py), abs=1e-9)
    assert rep.leakage <= 1e-9


def test_frl_function_family(parity4):
    rep = report(parity4, frl(parity4))
    assert rep.utility == pytest.approx(1.0, abs=1e-12)
    assert rep.leakage <= 1e-9


def test_frl_bsc_contract(bsc02):
    m = frl(bsc02)
    rep = report(bsc02, m)
    assert rep.leakage <= 1e-9 and rep.residual <= 1e-9
    assert m.nu <= 3
    # utility of frl equals H(Y|X) - I(X;U|Y); here U is the cell, Y the label
    assert rep.utility == pytest.approx(0.4, abs=1e-12)


def test_frl_contract_on_random_joints():
    for j in random_joints(1, 200):
        m = frl(j)
        rep = report(j, m)
        assert rep.leakage <= 1e-9
        assert rep.residual <= 1e-9
        assert m.nu <= j.nx * (j.ny - 1) + 1
        assert rep.entropy_u <= row_entropies(j).sum() + 1e-9


def test_frl_handles_zero_probability_x():
    j = JointDistribution(np.array([[0.3, 0.2], [0.0, 0.0], [0.1, 0.4]]))
    rep = report(j, frl(j))
    assert rep.leakage <= 1e-9 and rep.residual <= 1e-9


def test_frl_report_matches_reference(rng):
    j = random_joint(rng, 3, 3)
    m = frl(j)
    ref = ref_triple(j.p, m.k)
    rep = report(j, m)
    for key in ("utility", "leakage", "cond_leakage", "residual"):
        assert getattr(rep, key) == pytest.approx(ref[key], abs=1e-12)


# --- mixing with X ---------------------------------------------------------

def test_mix_alpha_zero_matches_base(bsc02):
    base = frl(bsc02)
    a, b = report(bsc02, base), report(bsc02, mix_with_x(bsc02, base, 0.0))
    for key in ("utility", "leakage", "cond_leakage", "residual", "entropy_u", "cardinality"):
        assert getattr(a, key) == pytest.approx(getattr(b, key), abs=1e-9)


def test_mix_alpha_one_reveals_x(bsc02):
    rep = report(bsc02, mix_with_x(bsc02, frl(bsc02), 1.0))
    assert rep.leakage == pytest.approx(entropy(bsc02.px), abs=1e-9)


def test_mix_leakage_is_alpha_hx(bsc02):
    rep = report(bsc02, mix_with_x(bsc02, frl(bsc02), 0.1))
    assert rep.leakage == pytest.approx(0.1, abs=1e-9)


def test_mix_rejects_bad_alpha_and_leaky_base(bsc02):
    with pytest.raises(DomainError):
        mix_with_x(bsc02, frl(bsc02), 1.5)
    leaky = Mechanism.from_channel(np.eye(2), 2)
    with pytest.raises(DomainError):
        mix_with_x(bsc02, leaky, 0.5)


# --- efrl ------------------------------------------------------------------

def test_efrl_at_zero_is_frl(bsc02):
    a, b = report(bsc02, efrl(bsc02, 0.0)), report(bsc02, frl(bsc02))
    for key in ("utility", "leakage", "cond_leakage", "residual", "entropy_u", "cardinality"):
        assert getattr(a, key) == pytest.approx(getattr(b, key), abs=1e-9)


@pytest.mark.parametrize("eps", [0.0, 0.05, 0.2])
def test_efrl_function_family_is_tight(parity4, eps):
    assert report(parity4, efrl(parity4, eps)).utility == pytest.approx(1 + eps, abs=1e-6)


def test_efrl_bsc_entropy_bound(bsc02):
    rep = report(bsc02, efrl(bsc02, 0.1))
    assert rep.leakage == pytest.approx(0.1, abs=1e-9)
    limit = ref_h(0.2) * 2 + 0.1 + ref_h(0.1)
    assert rep.entropy_u <= limit + 1e-9


def test_efrl_domain_errors(bsc02):
    with pytest.raises(DomainError):
        efrl(bsc02, -0.01)
    with pytest.raises(DomainError):
        efrl(bsc02, 0.3)


def test_efrl_contracts_on_random_joints():
    for j in random_joints(2, 200):
        eps = 0.5 * mutual_information(j)
        alpha = mixing_weight(j, eps)
        m = efrl(j, eps)
        rep = report(j, m)
        assert rep.leakage == pytest.approx(eps, abs=1e-9)
        assert rep.residual <= 1e-9
        assert rep.cardinality <= (j.nx * (j.ny - 1) + 1) * (j.nx + 1)
        assert rep.entropy_u <= row_entropies(j).sum() + eps + binary_entropy(alpha) + 1e-9
        assert rep.utility >= lower_L1(j, eps) - 1e-9


# --- function atoms and sfrl -----------------------------------------------

def test_function_atom_space_size(bsc02):
    space = FunctionAtomSpace.build(bsc02)
    assert space.size == 2 ** 2
    assert space.cost.shape == (4,)


def test_function_atom_objective_is_conditional_leakage(rng):
    j = random_joint(rng, 2, 3)
    space = FunctionAtomSpace.build(j)
    w = space.project(rng.dirichlet(np.ones(space.size)))
    assert space.residual(w) <= 1e-9
    m = space.mechanism(j, w)
    rep = report(j, m)
    assert rep.leakage <= 1e-9 and rep.residual <= 1e-9
    assert rep.cond_leakage == pytest.approx(space.objective(w), abs=1e-9)


def test_sfrl_function_family_is_zero():
    j = family_function(4, lambda y: y % 2)
    assert sfrl_search(j, FAST).psi_estimate == pytest.approx(0.0, abs=1e-9)


def test_sfrl_bsc_matches_layered_value(bsc02):
    res = sfrl_search(bsc02)
    assert res.psi_estimate == pytest.approx(0.6 - (1 - ref_h(0.2)), abs=1e-3)
    rep = report(bsc02, res.mechanism)
    assert rep.leakage <= 1e-9 and rep.residual <= 1e-9


def test_sfrl_two_sided_certificate():
    for j in random_joints(3, 30):
        res = sfrl_search(j, FAST)
        assert psi_lower(j) - 1e-6 <= res.psi_estimate <= sfrl_constant(mutual_information(j)) + 1e-9
        rep = report(j, res.mechanism)
        assert rep.leakage <= 1e-9 and rep.residual <= 1e-9


def test_sfrl_binary_y_equality():
    for j in random_joints(4, 20, sizes=(2, 3)):
        if j.ny != 2:
            continue
        assert sfrl_search(j, FAST).psi_estimate == pytest.approx(psi_lower(j), abs=1e-3)


def test_sfrl_is_deterministic(rng):
    j = random_joint(rng, 3, 3)
    a, b = sfrl_search(j, FAST), sfrl_search(j, FAST)
    assert a.psi_estimate == b.psi_estimate
    assert np.array_equal(a.weights, b.weights)


# --- esfrl -----------------------------------------------------------------

def test_esfrl_at_zero_is_sfrl(bsc02):
    a = report(bsc02, esfrl(bsc02, 0.0, FAST))
    b = report(bsc02, sfrl_search(bsc02, FAST).mechanism)
    assert a.utility == pytest.approx(b.utility, abs=1e-9)
    assert a.cond_leakage == pytest.approx(b.cond_leakage, abs=1e-9)


def test_esfrl_bsc_mixture_value(bsc02):
    rep = report(bsc02, esfrl(bsc02, 0.1))
    assert rep.cond_leakage == pytest.approx(0.1 * ref_h(0.2) + 0.9 * 0.321928, abs=1e-3)


def test_esfrl_function_family_has_no_conditional_leakage(parity4):
    assert report(parity4, esfrl(parity4, 0.05, FAST)).cond_leakage <= 1e-9


def test_esfrl_mixture_identity_and_bound():
    for j in random_joints(5, 40):
        eps = 0.5 * mutual_information(j)
        alpha = mixing_weight(j, eps)
        psi = sfrl_search(j, FAST).psi_estimate
        rep = report(j, esfrl(j, eps, FAST))
        assert rep.leakage == pytest.approx(eps, abs=1e-9)
        assert rep.residual <= 1e-9
        h_xy = conditional_entropy(j, "x|y")
        assert rep.cond_leakage == pytest.approx(alpha * h_xy + (1 - alpha) * psi, abs=1e-9)
        assert rep.cond_leakage <= alpha * h_xy + (1 - alpha) * sfrl_constant(mutual_information(j)) + 1e-9


# --- improve ---------------------------------------------------------------

def test_improve_from_constant_reaches_frl(bsc02):
    new = report(bsc02, improve(bsc02, Mechanism.constant(2, 2)))
    assert new.utility == pytest.approx(report(bsc02, frl(bsc02)).utility, abs=1e-9)
    assert new.residual <= 1e-9


def test_improve_is_noop_on_functional_mechanism(bsc02):
    m = frl(bsc02)
    assert improve(bsc02, m) is m


def test_improve_partial_reveal_on_erasure(erasure03):
    ch = np.hstack([0.5 * np.eye(3), np.full((3, 1), 0.5)])
    m = Mechanism.from_channel(ch, 2)
    before, after = report(erasure03, m), report(erasure03, improve(erasure03, m))
    assert after.utility > before.utility + 1e-6
    assert after.leakage == pytest.approx(before.leakage, abs=1e-9)
    assert after.residual <= 1e-9


def test_improve_never_hurts(rng):
    for _ in range(30):
        j = random_joint(rng, 2, 3)
        m = Mechanism(rng.dirichlet(np.ones(3), size=(2, 3)))
        before, after = report(j, m), report(j, improve(j, m))
        assert after.utility >= before.utility - 1e-12
        assert after.leakage == pytest.approx(before.leakage, abs=1e-9)


# --- saturation and time sharing ------------------------------------------

def test_as_hidden_accepts_function_family_frl(parity4):
    m = as_hidden(parity4, frl(parity4))
    assert m.scenario is Scenario.HIDDEN
    assert report(parity4, m).utility == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        as_hidden(family_bsc(0.2), frl(family_bsc(0.2)))


def test_saturate_function_family(parity4):
    rep = report(parity4, saturate_leakage(parity4, frl(parity4), 0.05))
    assert rep.leakage == pytest.approx(0.05, abs=1e-9)
    assert rep.utility == pytest.approx(1.05, abs=1e-6)


def test_saturate_at_current_leakage_keeps_value(parity4):
    m = as_hidden(parity4, frl(parity4))
    a, b = report(parity4, m), report(parity4, saturate_leakage(parity4, m, 0.0))
    assert a.utility == pytest.approx(b.utility, abs=1e-12)


@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_saturate_erasure_g0(eps):
    j = family_erasure(0.3)
    rep = report(j, saturate_leakage(j, g0(j).mechanism, eps))
    assert rep.leakage == pytest.approx(eps, abs=1e-9)
    assert rep.utility == pytest.approx(eps + ref_h(0.3), abs=1e-9)


def test_saturate_preconditions(erasure03, bsc02):
    reveal = Mechanism.from_channel(np.eye(3), 2)
    with pytest.raises(DomainError, match="I\\(X;Y\\|U\\)"):
        saturate_leakage(erasure03, reveal, 0.1)
    partial = Mechanism.from_channel(np.hstack([0.5 * np.eye(2), np.full((2, 1), 0.5)]), 2)
    with pytest.raises(DomainError, match="H\\(Y\\|X,U\\)"):
        saturate_leakage(bsc02, partial, 0.1)
    with pytest.raises(DomainError):
        saturate_leakage(bsc02, frl(bsc02), 0.1)
    with pytest.raises(DomainError):
        saturate_leakage(erasure03, g0(erasure03).mechanism, 0.9)


def test_time_share_reaches_target_leakage(rng):
    for _ in range(10):
        j = random_joint(rng, 2, 3)
        res = g0(j)
        info = mutual_information(j)
        eps = 0.4 * info
        rep = report(j, time_share(j, res.mechanism, eps))
        assert rep.leakage == pytest.approx(eps, abs=1e-9)
        ratio = eps / info
        assert rep.utility == pytest.approx(ratio * entropy(j.py) + (1 - ratio) * res.value, abs=1e-9)


def test_time_share_range(bsc02):
    with pytest.raises(DomainError):
        time_share(bsc02, Mechanism.constant(2, 2), 0.5)
