"""Glicko-2 rating updates for the model tournament.

Follows Glickman's published update procedure: ratings are converted to the
internal scale, one rating period of results is applied per call, and models
with no games only have their rating deviation inflated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

SCALE = 173.7178
DEFAULT_RATING = 1500.0
DEFAULT_RD = 350.0
DEFAULT_VOLATILITY = 0.06
CONVERGENCE = 1e-6
MAX_ITERATIONS = 100


class GlickoError(RuntimeError):
    pass


@dataclass(frozen=True)
class Rating:
    rating: float = DEFAULT_RATING
    rd: float = DEFAULT_RD
    volatility: float = DEFAULT_VOLATILITY

    def __post_init__(self):
        if self.rd <= 0 or self.volatility <= 0:
            raise GlickoError("rd and volatility must be > 0")


@dataclass(frozen=True)
class GlickoState:
    ratings: dict[str, Rating]
    tau: float = 0.5

    def register(self, model: str) -> "GlickoState":
        if model in self.ratings:
            return self
        new = dict(self.ratings)
        new[model] = Rating()
        return replace(self, ratings=new)


def _g(phi: float) -> float:
    return 1.0 / math.sqrt(1.0 + 3.0 * phi * phi / math.pi**2)


def _expected(mu: float, mu_j: float, phi_j: float) -> float:
    return 1.0 / (1.0 + math.exp(-_g(phi_j) * (mu - mu_j)))


def _new_volatility(sigma: float, delta: float, phi: float, v: float, tau: float) -> float:
    """Solve for the updated volatility with Glickman's bracketing iteration."""
    a = math.log(sigma * sigma)

    def f(x: float) -> float:
        ex = math.exp(x)
        num = ex * (delta * delta - phi * phi - v - ex)
        den = 2.0 * (phi * phi + v + ex) ** 2
        return num / den - (x - a) / (tau * tau)

    big_a = a
    if delta * delta > phi * phi + v:
        big_b = math.log(delta * delta - phi * phi - v)
    else:
        k = 1
        while f(a - k * tau) < 0:
            k += 1
            if k > MAX_ITERATIONS:
                raise GlickoError("volatility bracketing failed")
        big_b = a - k * tau

    fa, fb = f(big_a), f(big_b)
    for _ in range(MAX_ITERATIONS):
        if abs(big_b - big_a) <= CONVERGENCE:
            return math.exp(big_a / 2.0)
        big_c = big_a + (big_a - big_b) * fa / (fb - fa)
        fc = f(big_c)
        if fc * fb <= 0:
            big_a, fa = big_b, fb
        else:
            fa = fa / 2.0
        big_b, fb = big_c, fc
    raise GlickoError(f"volatility iteration did not converge in {MAX_ITERATIONS} steps")


def glicko_update(
    state: GlickoState, results: Sequence[tuple[str, str, float]]
) -> GlickoState:
    """Apply one rating period.

    ``results`` holds (model_a, model_b, score_a) with score_a in
    {0, 0.5, 1}. Every model in ``state`` is updated: opponents' pre-period
    ratings are used throughout, and no-game models have rd inflated.
    """
    for a, b, score in results:
        if a not in state.ratings or b not in state.ratings:
            raise GlickoError(f"unregistered model in result ({a!r}, {b!r})")
        if score not in (0.0, 0.5, 1.0):
            raise GlickoError(f"score must be 0, 0.5, or 1; got {score}")

    games: dict[str, list[tuple[str, float]]] = {m: [] for m in state.ratings}
    for a, b, score in results:
        games[a].append((b, score))
        games[b].append((a, 1.0 - score))

    new_ratings: dict[str, Rating] = {}
    for model, rating in state.ratings.items():
        mu = (rating.rating - DEFAULT_RATING) / SCALE
        phi = rating.rd / SCALE
        sigma = rating.volatility
        opponents = games[model]
        if not opponents:
            phi_star = math.sqrt(phi * phi + sigma * sigma)
            new_ratings[model] = Rating(rating.rating, phi_star * SCALE, sigma)
            continue
        v_inv = 0.0
        delta_sum = 0.0
        for opp_name, score in opponents:
            opp = state.ratings[opp_name]
            mu_j = (opp.rating - DEFAULT_RATING) / SCALE
            phi_j = opp.rd / SCALE
            g_j = _g(phi_j)
            e_j = _expected(mu, mu_j, phi_j)
            v_inv += g_j * g_j * e_j * (1.0 - e_j)
            delta_sum += g_j * (score - e_j)
        v = 1.0 / v_inv
        delta = v * delta_sum
        sigma_new = _new_volatility(sigma, delta, phi, v, state.tau)
        phi_star = math.sqrt(phi * phi + sigma_new * sigma_new)
        phi_new = 1.0 / math.sqrt(1.0 / (phi_star * phi_star) + 1.0 / v)
        mu_new = mu + phi_new * phi_new * delta_sum
        new_ratings[model] = Rating(
            rating=mu_new * SCALE + DEFAULT_RATING,
            rd=phi_new * SCALE,
            volatility=sigma_new,
        )
    return replace(state, ratings=new_ratings)
