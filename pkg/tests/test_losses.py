"""Loss identities: the hand-derived root-drop values, the exact weighted
total, gradient-penalty behavior, and triplet/reconstruction edge cases."""

import numpy as np
import pytest

from mrgan import autodiff as ad
from mrgan import losses as L
from mrgan.autodiff import Tensor
from mrgan.models import Discriminator, DiscriminatorConfig, HullNet, HullNetConfig

RNG = np.random.default_rng(31)


class _StubCritic:
    """Critic whose score ignores which points are present (root-blind)."""

    def __init__(self, value: float):
        self.value = value

    def forward(self, cloud, block=None):
        out = ad.scale(ad.mean_all(ad.mul(cloud, ad.scale(cloud, 0.0))),
                       0.0)
        return ad.add_scalar(out, self.value), None


class _DropAwareCritic:
    """D(full 8-point cloud) = 2, D(any 4-point drop) = 1."""

    def forward(self, cloud, block=None):
        n = cloud.data.shape[0]
        zero = ad.scale(ad.mean_all(cloud), 0.0)
        return ad.add_scalar(zero, 2.0 if n == 8 else 1.0), None


class TestRootDrop:
    def test_root_blind_critic_gives_zero(self):
        # [DERIVED] D(full) = D(drop) => each term (s - s_i)/s = 0
        fake = Tensor(RNG.normal(size=(8, 3)))
        loss = L.root_drop_loss(_StubCritic(2.0), fake, points_per_root=4)
        assert loss is not None
        assert loss.data.item() == pytest.approx(0.0, abs=1e-12)

    def test_hand_derived_half(self):
        # [DERIVED] R=2, D(G)=2, D(G\Gi)=1: mean of (2-1)/2 twice = 0.5
        fake = Tensor(RNG.normal(size=(8, 3)))
        loss = L.root_drop_loss(_DropAwareCritic(), fake, points_per_root=4)
        assert loss.data.item() == pytest.approx(0.5, abs=1e-12)

    def test_near_zero_score_skipped(self):
        fake = Tensor(RNG.normal(size=(8, 3)))
        assert L.root_drop_loss(_StubCritic(0.0), fake, 4) is None
        assert L.root_drop_loss(_StubCritic(5e-7), fake, 4) is None


class TestTotal:
    def test_unit_losses_weighted_total(self):
        # [PAPER] weights 1.0/0.1/1.0/1.0: 1 + 1 + 0.1 + 1 + 1 = 4.1 exactly
        one = Tensor(np.array(1.0))
        parts = {k: one for k in ("wgan", "h", "rd", "t", "rec")}
        total = L.total_g_loss(parts, L.LossWeights())
        assert total.data.item() == 4.1

    def test_disabled_terms_drop_out(self):
        one = Tensor(np.array(1.0))
        parts = {k: one for k in ("wgan", "h", "rd", "t", "rec")}
        w = L.LossWeights(enable_h=False, enable_rd=False, enable_t=False,
                          enable_rec=False)
        assert L.total_g_loss(parts, w).data.item() == 1.0

    def test_skipped_root_drop_contributes_zero(self):
        one = Tensor(np.array(1.0))
        parts = {"wgan": one, "h": one, "rd": None, "t": one, "rec": one}
        assert L.total_g_loss(parts, L.LossWeights()).data.item() == 4.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            L.LossWeights(lam_h=-0.1)


class TestWganGp:
    def _disc(self):
        return Discriminator(DiscriminatorConfig(conv=(8, 16), dense=(8,)),
                             np.random.default_rng(1))

    def test_penalty_zero_when_disabled(self):
        disc = self._disc()
        real = RNG.normal(size=(16, 3))
        fake = RNG.normal(size=(16, 3))
        base = L.wgan_d_loss(disc, real, fake, lam_gp=0.0)
        s_f, _ = disc.forward(Tensor(fake))
        s_r, _ = disc.forward(Tensor(real))
        expected = ad.mean_all(s_f).data.item() - ad.mean_all(s_r).data.item()
        assert base.data.item() == pytest.approx(expected, abs=1e-12)

    def test_penalty_nonnegative_and_deterministic(self):
        disc = self._disc()
        real = RNG.normal(size=(16, 3))
        fake = RNG.normal(size=(16, 3))
        l1 = L.wgan_d_loss(disc, real, fake, rng=np.random.default_rng(5))
        l2 = L.wgan_d_loss(disc, real, fake, rng=np.random.default_rng(5))
        assert l1.data.item() == l2.data.item()
        base = L.wgan_d_loss(disc, real, fake, lam_gp=0.0)
        assert l1.data.item() >= base.data.item()  # penalty term is a square

    def test_penalty_reaches_critic_parameters(self):
        disc = self._disc()
        real = RNG.normal(size=(8, 3))
        fake = RNG.normal(size=(8, 3))
        loss = L.wgan_d_loss(disc, real, fake, rng=np.random.default_rng(5))
        loss.backward()
        grads = [p.grad for p in disc.parameters()]
        assert all(g is not None for g in grads)
        assert any(np.abs(g.data).max() > 0 for g in grads)

    def test_g_loss_is_negated_score(self):
        disc = self._disc()
        fake = Tensor(RNG.normal(size=(8, 3)))
        g = L.wgan_g_loss(disc, fake)
        s, _ = disc.forward(fake)
        assert g.data.item() == pytest.approx(-ad.mean_all(s).data.item())

    def test_shape_mismatch(self):
        with pytest.raises(ad.DimensionError):
            L.wgan_d_loss(self._disc(), RNG.normal(size=(8, 3)),
                          RNG.normal(size=(6, 3)))


class TestConvexity:
    def test_mean_over_root_blocks(self):
        hull = HullNet(HullNetConfig(conv=(8,), dense=(4,)),
                       np.random.default_rng(2))
        fake = Tensor(RNG.normal(size=(12, 3)))
        loss = L.convexity_loss(hull, fake, points_per_root=4)
        per_block = [hull.predict(fake.data[i * 4:(i + 1) * 4]) for i in range(3)]
        assert loss.data.item() == pytest.approx(np.mean(per_block), abs=1e-12)


class TestTriplet:
    def test_single_cluster_per_root_far_apart(self):
        # two tight, distant clusters: d(a,p) ~ 0, d(a,n) ~ 20 >> margin,
        # so every hinge is inactive
        pts = np.vstack([np.zeros((8, 3)) + RNG.normal(size=(8, 3)) * 1e-4,
                         np.full((8, 3), 20.0) + RNG.normal(size=(8, 3)) * 1e-4])
        loss = L.triplet_loss(Tensor(pts), 8, rng=np.random.default_rng(0))
        assert loss.data.item() == pytest.approx(0.0, abs=1e-12)

    def test_coincident_roots_hinge_at_margin(self):
        # all points identical: every distance 0, hinge = margin exactly
        pts = np.ones((16, 3))
        loss = L.triplet_loss(Tensor(pts), 8, margin=0.2,
                              rng=np.random.default_rng(0))
        assert loss.data.item() == pytest.approx(0.2, abs=1e-9)

    def test_needs_two_roots(self):
        with pytest.raises(ValueError):
            L.triplet_loss(Tensor(np.zeros((8, 3))), 8)

    def test_gradient_flows(self):
        pts = Tensor(RNG.normal(size=(16, 3)), requires_grad=True)
        loss = L.triplet_loss(pts, 8, rng=np.random.default_rng(1))
        loss.backward()
        assert pts.grad is not None


class TestRecon:
    def test_zero_on_match(self):
        z = RNG.normal(size=(2, 96))
        assert L.recon_loss(z, Tensor(z.copy())).data.item() == 0.0

    def test_mse_hand_value(self):
        z = np.zeros((1, 4))
        recon = Tensor(np.array([[1.0, 1.0, 0.0, 0.0]]))
        assert L.recon_loss(z, recon).data.item() == pytest.approx(0.5)

    def test_shape_checked(self):
        with pytest.raises(ad.DimensionError):
            L.recon_loss(np.zeros((2, 96)), Tensor(np.zeros((3, 96))))
