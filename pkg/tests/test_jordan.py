import numpy as np
import pytest

from tracefield.algebra import (AlgebraDescriptor, AlgebraError, Element,
                                FunctionalRep, functional_norm,
                                random_contraction)
from tracefield.fields import (MapField, compress_norm_field,
                               constant_map_field, diagonal_map_field,
                               evaluate, map_field_from_nodes)
from tracefield.generate import (crossing_map_field, random_map_field,
                                 smooth_map_field)
from tracefield.grids import path_grid
from tracefield.jordan import (continuity_report, decompose_map,
                               delta_continuity_report, locality_check,
                               separator, verify_norm_additivity)

M2 = AlgebraDescriptor((2,))


def scalar_field(grid, values):
    stack = np.asarray(values, dtype=complex).reshape(grid.n, 1, 1)
    return MapField(grid, AlgebraDescriptor((1,)), [stack])


class TestDecompose:
    def test_positive_field_has_no_negative_part(self):
        g = path_grid(6)
        phi = constant_map_field(g, FunctionalRep(M2, [np.eye(2)]))
        res = decompose_map(phi)
        assert np.max(np.abs(res.minus.stacks[0])) <= 1e-14
        assert verify_norm_additivity(res) <= 1e-12

    def test_scalar_ramp_sign_split(self):
        g = path_grid(21)
        phi = scalar_field(g, g.positions - 0.5)
        res = decompose_map(phi)
        plus = res.plus.stacks[0][:, 0, 0].real
        minus = res.minus.stacks[0][:, 0, 0].real
        assert np.allclose(plus, np.maximum(g.positions - 0.5, 0), atol=1e-14)
        assert np.allclose(minus, np.maximum(0.5 - g.positions, 0), atol=1e-14)

    def test_constant_offdiagonal_rank_one_parts(self):
        g = path_grid(4)
        phi = constant_map_field(
            g, FunctionalRep(M2, [np.array([[0, 1], [1, 0]], dtype=complex)]))
        res = decompose_map(phi)
        assert np.allclose(res.plus.stacks[0][2],
                           0.5 * np.array([[1, 1], [1, 1]]), atol=1e-12)
        assert np.allclose(res.minus.stacks[0][2],
                           0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-12)

    @pytest.mark.parametrize("blocks", [(1,), (2,), (1, 1), (3, 2)])
    def test_random_field_contracts(self, blocks):
        g = path_grid(30)
        phi = random_map_field(blocks, g, seed=hash(blocks) % 2**31)
        res = decompose_map(phi)
        assert res.reconstruction_residual <= 1e-10
        assert res.min_eigenvalue >= -1e-10
        assert verify_norm_additivity(res) <= 1e-10

    def test_sign_equivariance(self):
        g = path_grid(9)
        phi = random_map_field([2, 1], g, seed=77)
        res = decompose_map(phi)
        res_neg = decompose_map(phi.scaled(-1.0))
        for a, b in zip(res_neg.plus.stacks, res.minus.stacks):
            assert np.array_equal(a, b)
        for a, b in zip(res_neg.minus.stacks, res.plus.stacks):
            assert np.array_equal(a, b)

    def test_minimality_under_fuzz(self, rng):
        g = path_grid(8)
        phi = random_map_field([2], g, seed=5)
        res = decompose_map(phi)
        for _ in range(40):
            w = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
            shift = (w @ w.conj().T) * rng.uniform(0, 0.3)
            for t in range(g.n):
                alt_plus = res.plus.stacks[0][t] + shift
                alt_minus = res.minus.stacks[0][t] + shift
                total = np.trace(alt_plus).real + np.trace(alt_minus).real
                assert total >= res.norms[t] - 1e-9


class TestNormAdditivityResidual:
    def test_decomposition_output_is_tight(self):
        g = path_grid(12)
        res = decompose_map(random_map_field([2, 2], g, seed=3))
        assert verify_norm_additivity(res) <= 1e-10

    def test_padded_split_shows_residual(self):
        g = path_grid(5)
        phi = scalar_field(g, np.linspace(-1, 1, 5))
        res = decompose_map(phi)
        tau = 0.25
        padded_plus = MapField(g, phi.algebra,
                               [res.plus.stacks[0] + tau])
        padded_minus = MapField(g, phi.algebra,
                                [res.minus.stacks[0] + tau])
        from dataclasses import replace
        from tracefield.fields import pointwise_norm
        padded = replace(res, norms_plus=pointwise_norm(padded_plus),
                         norms_minus=pointwise_norm(padded_minus))
        assert verify_norm_additivity(padded) == pytest.approx(2 * tau,
                                                               abs=1e-12)

    def test_zero_map(self):
        g = path_grid(4)
        res = decompose_map(constant_map_field(g, M2.zero_functional()))
        assert verify_norm_additivity(res) == 0.0


class TestSeparator:
    def test_diagonal(self):
        C2 = AlgebraDescriptor((1, 1))
        k = separator(FunctionalRep(C2, [[[1.0]], [[-2.0]]]))
        assert k.blocks[0][0, 0] == 0.0 and k.blocks[1][0, 0] == 1.0

    def test_positive_gives_zero(self):
        from tracefield.algebra import random_state
        k = separator(random_state(M2, 8))
        assert np.max(np.abs(k.blocks[0])) == 0.0

    def test_offdiagonal(self):
        k = separator(FunctionalRep(M2, [np.array([[0, 1], [1, 0]])]))
        assert np.allclose(k.blocks[0], 0.5 * np.array([[1, -1], [-1, 1]]),
                           atol=1e-12)

    def test_pairing_identities(self):
        from tracefield.algebra import jordan_decompose_functional, random_functional
        for seed in range(10):
            rho = random_functional(AlgebraDescriptor((3, 2)), seed)
            plus, minus = jordan_decompose_functional(rho)
            k = separator(rho)
            one_minus_k = Element(
                rho.algebra,
                [np.eye(d) - b for d, b in zip(rho.algebra.blocks, k.blocks)],
                selfadjoint=True)
            assert abs(plus.pair(k)) <= 1e-10
            assert abs(minus.pair(one_minus_k)) <= 1e-10
            # contraction bounds
            for b in k.blocks:
                w = np.linalg.eigvalsh(b)
                assert w.min() >= -1e-12 and w.max() <= 1 + 1e-12

    def test_compression_inequality_chain_commutative(self, rng):
        # plus(h) + minus(h) equals the compressed norm for function algebras
        blocks = AlgebraDescriptor((1, 1, 1))
        g = path_grid(7)
        phi = map_field_from_nodes(
            g, [FunctionalRep(blocks, [[[v]] for v in rng.standard_normal(3)])
                for _ in range(7)])
        h = random_contraction(blocks, 12)
        res = decompose_map(phi)
        lhs = evaluate(res.plus, h) + evaluate(res.minus, h)
        rhs = compress_norm_field(phi, h)
        assert np.max(lhs - rhs) <= 1e-9
        assert np.max(np.abs(lhs - rhs)) <= 1e-9


class TestContinuityReport:
    def test_constant_field_all_zero(self):
        g = path_grid(10)
        phi = constant_map_field(g, FunctionalRep(M2, [np.diag([1.0, -1.0])]))
        report = continuity_report(decompose_map(phi), refinements=2)
        assert np.max(report.jumps) == 0.0
        assert report.passes

    def test_scalar_ramp_jump_halves(self):
        g = path_grid(41)
        phi = scalar_field(g, g.positions - 0.5)
        report = continuity_report(decompose_map(phi), refinements=3)
        unit_jumps = report.jumps[0, 0]    # plus part on the unit element
        step = 1.0 / 40
        assert unit_jumps[0] == pytest.approx(step, abs=1e-12)
        assert report.min_ratio >= 1.5
        assert np.allclose(unit_jumps[:-1] / unit_jumps[1:], 2.0, atol=1e-6)

    def test_eigenvalue_crossing_family(self):
        g = path_grid(41)
        report = continuity_report(decompose_map(crossing_map_field(g)),
                                   refinements=3)
        assert report.passes
        assert report.min_ratio >= 1.5


class TestDeltaContinuity:
    def test_smooth_field_needs_no_budget(self):
        g = path_grid(60)
        phi = crossing_map_field(g)
        report = delta_continuity_report(phi, delta=0.0)
        assert report.passes

    def test_scalar_jump_is_tight(self):
        g = path_grid(10)
        vals = np.ones(10)
        vals[5:] = 1.25
        phi = scalar_field(g, vals)
        report = delta_continuity_report(phi, delta=0.0)
        assert report.passes
        assert report.norm_modulus == pytest.approx(0.25)
        assert report.tightness >= 0.9

    def test_zero_map(self):
        g = path_grid(6)
        phi = constant_map_field(g, M2.zero_functional())
        report = delta_continuity_report(phi, delta=0.0)
        assert report.passes and report.max_violation <= 0


class TestLocality:
    def test_ramp_weights(self):
        g = path_grid(15)
        phi = diagonal_map_field(g, g.positions - 0.5)
        verdict = locality_check(decompose_map(phi))
        assert verdict.passes
        assert np.allclose(verdict.weights_plus,
                           np.maximum(g.positions - 0.5, 0), atol=1e-12)

    def test_positive_weights_no_negative_part(self):
        g = path_grid(8)
        phi = diagonal_map_field(g, np.abs(np.sin(1 + g.positions)))
        verdict = locality_check(decompose_map(phi))
        assert verdict.passes
        assert np.max(verdict.weights_minus) == 0.0

    def test_random_weights_match_scalar_split(self, rng):
        g = path_grid(12)
        c = rng.standard_normal(12)
        verdict = locality_check(decompose_map(diagonal_map_field(g, c)))
        assert verdict.passes
        assert np.allclose(verdict.weights_plus, np.maximum(c, 0), atol=1e-12)
        assert np.allclose(verdict.weights_minus, np.maximum(-c, 0),
                           atol=1e-12)

    def test_non_diagonal_rejected(self):
        g = path_grid(4)
        phi = random_map_field([1] * 4, g, seed=2)
        with pytest.raises(AlgebraError):
            locality_check(decompose_map(phi))
