"""Shared helpers: randomized valid models and the headline example set."""
import numpy as np

from delayval import DelayMeasure, HistorySegment, IncomeModel, MarketParams


def headline_model():
    """Single-atom drift-delay model with a flat unit history."""
    market = MarketParams(r=0.03, mu=[0.07], sigma=[[0.2]])
    phi = DelayMeasure.point_mass(1.0, -1.0, 0.02)
    model = IncomeModel(mu0=0.01, sigma0=[0.1], phi=phi,
                        phi_vec=(DelayMeasure.zero(1.0),))
    hist = HistorySegment.flat(1.0, 1.0, n_points=101)
    return model, market, hist


def random_valid_model(rng: np.random.Generator, *, n_assets=None, want_spread_sign=+1,
                       with_density=None, spread_margin=(0.02, 0.05)):
    """A random model with a nonnegative risk-adjusted measure.

    The volatility delay measures are set proportional to the drift delay
    measure with total risk price strictly below 1, which keeps the
    combination nonnegative.  The drift measure's mass is scaled to hit a
    discount spread inside spread_margin (sign flipped for
    want_spread_sign < 0).
    """
    n = n_assets if n_assets is not None else int(rng.integers(1, 3))
    # two-decimal windows keep the acceptance grid steps (1e-3, 5e-4) dividing d
    d = round(float(rng.uniform(0.4, 1.6)), 2)
    r = float(rng.uniform(0.02, 0.05))
    mu = r + rng.uniform(0.01, 0.05, size=n)
    sigma = np.diag(rng.uniform(0.15, 0.3, size=n))
    market = MarketParams(r=r, mu=mu, sigma=sigma)

    sigma0 = rng.uniform(0.05, 0.2, size=n)
    sk = float(sigma0 @ market.kappa)

    atoms = [(-d, 1.0)]
    for _ in range(int(rng.integers(0, 3))):
        atoms.append((float(rng.uniform(-d, 0.0)), float(rng.uniform(0.2, 1.0))))
    if with_density is None:
        with_density = bool(rng.integers(0, 2))
    density = rng.uniform(0.0, 1.0, size=64) if with_density else np.zeros(0)
    base = DelayMeasure(d, atoms=tuple(atoms), density=density)

    # phi_i = c_i * phi with sum_i kappa_i c_i < 1 keeps the risk-adjusted
    # combination proportional to phi (hence nonnegative)
    c = rng.uniform(0.0, 0.4, size=n)
    kc = float(market.kappa @ c)
    if kc >= 0.9:
        c *= 0.9 / kc
        kc = float(market.kappa @ c)

    # choose the linear drift a inside its feasible band, then scale the
    # drift measure so the discount spread equals the target exactly
    target = float(rng.uniform(*spread_margin))
    a_lo = -0.9 * sk + 1e-4
    a_hi = r - want_spread_sign * target
    if a_hi <= a_lo:
        target = 0.5 * (r - a_lo)
        a_hi = r - want_spread_sign * target
    a = float(rng.uniform(a_lo, a_hi))
    s = (r - want_spread_sign * target - a) / ((1.0 - kc) * base.exp_integral(r))
    mu0 = a + sk
    phi = base.scaled(s)
    phi_vec = tuple(phi.scaled(float(ci)) for ci in c)
    model = IncomeModel(mu0=mu0, sigma0=sigma0, phi=phi, phi_vec=phi_vec)
    return model, market


def random_history(rng: np.random.Generator, d: float, n_points: int = 201,
                   t0: float = 0.0) -> HistorySegment:
    """Smooth strictly positive history on [t0-d, t0]."""
    s = np.linspace(-d, 0.0, n_points)
    a, b, c = rng.uniform(-0.3, 0.3, size=3)
    vals = 1.0 + a * s / d + b * (s / d) ** 2 + 0.2 * c * np.cos(np.pi * s / d)
    return HistorySegment(t0=t0, d=d, values=np.maximum(vals, 0.1))
