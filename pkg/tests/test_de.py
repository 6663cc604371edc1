"""Density evolution recursions and windows."""

import numpy as np
import pytest

from scturbo import (DEParams, EnsembleSpec, GeneratorSpec, aposteriori_profile,
                     box_average, coupled_prior, de_fixed_point, de_step,
                     effective_erasure, initial_state, pcc_step,
                     triangle_average)

GEN = GeneratorSpec.parse("1,5/7")
PCC = EnsembleSpec("pcc", (GEN, GEN))
SCC = EnsembleSpec("scc", (GEN, GEN))


def test_effective_erasure_endpoints():
    assert effective_erasure(0.3, 1.0) == pytest.approx(0.3)
    assert effective_erasure(0.3, 0.0) == 1.0
    assert effective_erasure(0.0, 0.25) == pytest.approx(0.75)


def test_box_average_orientation():
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert box_average(x, 0, +1).tolist() == x.tolist()
    assert box_average(x, 1, +1).tolist() == [0.5, 0.0, 0.0, 0.0]
    assert box_average(x, 1, -1).tolist() == [0.5, 0.5, 0.0, 0.0]


def test_coupled_prior_matches_triangle_inside():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=30)
    for m in (1, 2, 3):
        two_stage = coupled_prior(x, m)
        single = triangle_average(x, m)
        assert np.allclose(two_stage[m:-m], single[m:-m], atol=1e-14)


def test_coupled_prior_boundary_is_stricter_than_triangle():
    # bits from before the chain are known; the first prior entry must only
    # average over genuinely transmitted positions
    ones = np.ones(12)
    assert coupled_prior(ones, 1)[0] == pytest.approx(0.5)
    assert triangle_average(ones, 1)[0] == pytest.approx(0.75)


def test_initial_state_all_erased():
    state = initial_state(PCC.with_coupling(2, 9))
    assert set(state.streams) == {"upper_sys", "upper_par",
                                  "lower_sys", "lower_par"}
    for arr in state.streams.values():
        assert arr.shape == (9,)
        assert (arr == 1.0).all()


def test_de_step_dispatch_matches_family_step():
    state = initial_state(PCC)
    a = de_step(state, 0.5, PCC)
    b = pcc_step(state, 0.5, PCC)
    for key in a.streams:
        assert np.array_equal(a.streams[key], b.streams[key])


def test_perfect_channel_decodes_immediately():
    for spec in (PCC, SCC):
        result = de_fixed_point(spec, 0.0)
        assert result.status == "decoded"
        assert result.iterations == 1


@pytest.mark.parametrize("spec,good,bad", [
    (PCC, 0.60, 0.66),
    (SCC, 0.66, 0.71),
])
def test_threshold_anchors(spec, good, bad):
    assert de_fixed_point(spec, good).status == "decoded"
    stuck = de_fixed_point(spec, bad)
    assert stuck.status == "stalled"
    assert stuck.max_aposteriori > 0.1


def test_memoryless_coupling_reduces_to_uncoupled():
    coupled = EnsembleSpec("pcc", (GEN, GEN), coupling_memory=0,
                           coupling_length=5)
    a = de_fixed_point(coupled, 0.52)
    b = de_fixed_point(PCC, 0.52)
    assert a.status == b.status
    assert a.iterations == b.iterations
    for key in a.state.streams:
        assert np.allclose(a.state.streams[key],
                           np.repeat(b.state.streams[key], 5), atol=0)


def test_full_survival_equals_default():
    explicit = EnsembleSpec("scc", (GEN, GEN), rho0=1.0, rho1=1.0, rho2=1.0)
    a = de_fixed_point(explicit, 0.6)
    b = de_fixed_point(SCC, 0.6)
    for key in a.state.streams:
        assert np.array_equal(a.state.streams[key], b.state.streams[key])


def test_iterations_monotone_from_all_erased():
    rng = np.random.default_rng(13)
    for spec in (PCC, SCC, PCC.with_coupling(1, 8), SCC.with_coupling(2, 8)):
        eps = float(rng.uniform(0.1, 0.95))
        result = de_fixed_point(spec, eps, DEParams(max_iterations=40),
                                record_trace=True)
        for key in result.state.streams:
            seq = [s[key] for s in result.stream_trace]
            for prev, cur in zip(seq, seq[1:]):
                assert (cur <= prev + 1e-12).all()


def test_identical_components_stay_identical():
    result = de_fixed_point(PCC.with_coupling(1, 12), 0.65,
                            DEParams(max_iterations=60))
    assert np.array_equal(result.state.upper_sys, result.state.lower_sys)
    assert np.array_equal(result.state.upper_par, result.state.lower_par)


@pytest.mark.parametrize("spec,eps", [
    (PCC.with_coupling(1, 30), 0.66),
    (SCC.with_coupling(1, 30), 0.76),
])
def test_stalled_wave_is_unimodal(spec, eps):
    result = de_fixed_point(spec, eps)
    assert result.status == "stalled"
    profile = aposteriori_profile(result.state, eps, spec)
    d = np.diff(profile)
    tol = 1e-9
    falling = False
    for step in d:
        if step < -tol:
            falling = True
        elif step > tol:
            assert not falling, "profile rose again after falling"


def test_aposteriori_profile_initial_state():
    spec = PCC.with_coupling(1, 10)
    profile = aposteriori_profile(initial_state(spec), 0.37, spec)
    assert profile.shape == (10,)
    assert np.allclose(profile[:-1], 0.37)
    # the last position averages its window with decoded positions past
    # the chain end
    assert profile[-1] == pytest.approx(0.37 * 0.25)


def test_trace_recording_and_limit():
    result = de_fixed_point(PCC, 0.3, record_trace=True, trace_limit=5)
    assert result.status == "decoded"
    expect = min(result.iterations, 5) + 1
    assert len(result.profile_trace) == expect
    assert len(result.stream_trace) == expect
    assert result.profile_trace[0].shape == (1,)


def test_rejects_invalid_inputs():
    with pytest.raises(ValueError):
        de_fixed_point(PCC, 1.2)
    with pytest.raises(ValueError):
        de_fixed_point(PCC, -0.01)
    with pytest.raises(ValueError):
        DEParams(max_iterations=0)
    with pytest.raises(ValueError):
        DEParams(delta=0.0)
    with pytest.raises(ValueError):
        DEParams(p_target=2.0)
