"""Decision policies over the tiered purchase stream.

Every policy answers ``offer(t)`` before each customer and digests the
outcome in ``observe(t, offer, outcome)``.  The learning policies keep an
EpochLedger and re-decide at their natural epoch boundaries: the UCB family
re-solves the offline problem under optimistic valuations at the start of
every tier-2 epoch (tier 1 alone is re-solved at intermediate tier-1
closures, with the tier-2 set frozen by the epoch lock), while the
explore-then-exploit benchmark holds each candidate offer until a customer
walks away with nothing.

Policies price offers with the prefix-pair family (``exact=False``), the
same family the simulator's regret benchmark maximizes over, so a policy is
never judged against an optimum it was not allowed to search — and at the
catalog sizes the experiments run, the exact completion would be
intractable inside the decision loop anyway.

``epoch_regret_closed_form`` / ``epoch_regret_monte_carlo`` price the
per-epoch cost of carrying one under-learned product in either tier of a
fixed offer; their tier-2 advantage is what justifies the UCB policy's
habit of parking exploration products in the second tier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ConfigError, InvalidOfferError
from .estimation import EpochLedger
from .model import (
    Catalog,
    ChoiceOutcome,
    ProductId,
    TieredOffer,
    _weight,
    expected_profit,
    sorted_ids,
    total_weight,
)
from .optimizer import (
    enumerate_prefix_pair_offers,
    solve_tier1_given_tier2,
    solve_two_tier,
)

# Optimistic preference weight for a product with no completed epochs yet:
# the model's upper bound, kept strictly inside it so a genuinely estimated
# weight of 1.0 still sorts above a cold start.
COLD_START_UCB = 1.0 - 1e-9


class Policy:
    """Base sequential policy: ``offer`` then ``observe``, once per step.

    ``known_valuations`` carries the preference weights the seller already
    trusts (e.g. long-established products); policies that estimate may pin
    them instead of learning them.
    """

    name = "policy"

    def __init__(self, catalog: Catalog, rng, *, known_valuations: Mapping | None = None):
        self._catalog = catalog
        self._rng = rng
        known = dict(known_valuations or {})
        for i in sorted_ids(known):
            catalog.product(i)
            if not 0.0 <= known[i] <= 1.0:
                raise ConfigError(
                    f"known valuation for {i!r} must lie in [0, 1], got {known[i]!r}"
                )
        self._known = known

    def offer(self, t: int) -> TieredOffer:
        raise NotImplementedError

    def observe(self, t: int, offer: TieredOffer, outcome: ChoiceOutcome) -> None:
        pass


class OraclePolicy(Policy):
    """Clairvoyant benchmark: re-solves with the true valuations whenever the
    visible product set changes (i.e. at launches)."""

    name = "oracle"

    def __init__(self, catalog, rng, *, known_valuations=None, exact: bool = False):
        super().__init__(catalog, rng, known_valuations=known_valuations)
        self._exact = exact
        self._visible: frozenset | None = None
        self._current: TieredOffer | None = None

    def offer(self, t: int) -> TieredOffer:
        visible = self._catalog.visible_at(t)
        if visible != self._visible:
            self._visible = visible
            result = solve_two_tier(
                self._catalog,
                candidates_tier1=self._catalog.candidates_tier1 & visible,
                candidates_tier2=self._catalog.candidates_tier2 & visible,
                exact=self._exact,
            )
            self._current = result.offer
        return self._current


class UcbTieredPolicy(Policy):
    """Optimistic epoch learner with a minimum-learning guarantee.

    At the start of each tier-2 epoch: build an optimistic valuation for
    every visible product (known weights pinned; estimated products get
    their UCB at the current epoch count; never-offered products get
    COLD_START_UCB), re-solve the two-tier problem, and append every
    under-learned product the solution skipped — the set H — to the second
    tier, where carrying an unknown product is provably the cheaper of the
    two placements.  The tier-2 set then stays frozen for the whole epoch;
    when an inner tier-1 epoch closes, only the tier-1 set is re-solved
    against the frozen tier 2.

    A product counts as under-learned while the ledger has fewer than
    ``min_epochs`` completed epochs offering it and its weight is not known
    a priori.  Once learned, low-profit products simply stop being selected;
    nothing is force-dropped.
    """

    name = "ucb_tiered"

    def __init__(
        self,
        catalog,
        rng,
        *,
        min_epochs: int = 0,
        known_valuations: Mapping | None = None,
        confidence_scale: float | None = None,
    ):
        super().__init__(catalog, rng, known_valuations=known_valuations)
        if min_epochs < 0:
            raise ConfigError(f"min_epochs must be >= 0, got {min_epochs!r}")
        self.min_epochs = int(min_epochs)
        self.ledger = EpochLedger()
        self._confidence_scale = confidence_scale
        self._visible: frozenset = frozenset()
        self._tier2_locked: frozenset = frozenset()
        self._forced_tier1: frozenset = frozenset()
        self._current: TieredOffer | None = None
        self._need_full = True
        self._need_tier1 = False

    # -- hooks ------------------------------------------------------------

    def _assign_forced(self, under_learned: tuple) -> tuple[tuple, tuple]:
        """Split the exploration set H into (tier-1 part, tier-2 part)."""
        return (), under_learned

    # -- mechanics ---------------------------------------------------------

    def _needs_learning(self, product_id) -> bool:
        if product_id in self._known:
            return False
        return self.ledger.times_offered(product_id) < self.min_epochs

    def _optimistic_valuations(self, epoch: int) -> dict:
        n_products = len(self._visible)
        values = {}
        for i in sorted_ids(self._visible):
            if i in self._known:
                values[i] = self._known[i]
            elif self.ledger.has_estimate(i):
                values[i] = self.ledger.valuation_ucb(
                    i, epoch, n_products, self._confidence_scale
                )
            else:
                values[i] = COLD_START_UCB
        return values

    def _start_epoch(self, t: int) -> None:
        self._visible = self._catalog.visible_at(t)
        values = self._optimistic_valuations(self.ledger.completed)
        result = solve_two_tier(
            self._catalog,
            valuations=values,
            candidates_tier1=self._catalog.candidates_tier1 & self._visible,
            candidates_tier2=self._catalog.candidates_tier2 & self._visible,
            exact=False,
        )
        selected = result.offer.all_ids
        under = tuple(
            i
            for i in sorted_ids(self._visible)
            if self._needs_learning(i) and i not in selected
        )
        forced1, forced2 = self._assign_forced(under)
        self._forced_tier1 = frozenset(forced1)
        self._tier2_locked = result.offer.tier(1) | frozenset(forced2)
        self._current = TieredOffer.two_tier(
            result.offer.tier(0) | self._forced_tier1, self._tier2_locked
        )
        self._need_full = False
        self._need_tier1 = False

    def _recompute_tier1(self) -> None:
        values = self._optimistic_valuations(self.ledger.completed)
        tier1, _ = solve_tier1_given_tier2(
            self._catalog,
            self._tier2_locked,
            valuations=values,
            candidates_tier1=self._catalog.candidates_tier1 & self._visible,
            forced_tier1=self._forced_tier1,
        )
        self._current = TieredOffer.two_tier(tier1, self._tier2_locked)
        self._need_tier1 = False

    def offer(self, t: int) -> TieredOffer:
        if self._need_full or self._current is None:
            self._start_epoch(t)
        elif self._need_tier1:
            self._recompute_tier1()
        return self._current

    def observe(self, t, offer, outcome) -> None:
        events = self.ledger.record_step(offer, outcome)
        if events.closed_tier2 is not None:
            self._need_full = True
        elif events.closed_tier1 is not None:
            self._need_tier1 = True


class RandomTierLearningPolicy(UcbTieredPolicy):
    """UCB learner that flips a fair coin per exploration product to pick its
    tier, instead of always using the cheaper second tier.  Tier-1 picks stay
    forced through the epoch's tier-1 re-solves so their exposure matches the
    coin's intent."""

    name = "random_tier"

    def _assign_forced(self, under_learned):
        tier1, tier2 = [], []
        for i in under_learned:
            if self._rng.random() < 0.5:
                tier1.append(i)
            else:
                tier2.append(i)
        return tuple(tier1), tuple(tier2)


class ExploreThenExploitPolicy(Policy):
    """Count-based benchmark over the prefix-pair candidate offers.

    The candidate list is every prefix-pair offer, cycled in ascending
    (tier-1 cutoff, tier-2 cutoff) order.  After each full no-purchase the
    policy re-estimates every product's weight (never-offered products count
    as 0), prices all candidates, and either *explores* — serves the next
    candidate in cycle order whose estimated profit strictly beats the
    incumbent's and whose display count is under max(gamma * ln t, 1) — or,
    when none qualifies, *exploits*: the incumbent is re-pointed at the
    current estimated argmax and served.  The quota floor of one display
    means every candidate's first showing is always allowed.

    Ties in the argmax prefer more products shown (then a larger first
    tier), so the first incumbent under all-zero estimates displays the
    whole catalog.  Requires every product launched at t=0.
    """

    name = "explore_then_exploit"

    def __init__(self, catalog, rng, *, gamma: float = 30.0, known_valuations=None):
        super().__init__(catalog, rng, known_valuations=known_valuations)
        if gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {gamma!r}")
        late = [i for i in sorted_ids(catalog.ids) if catalog.product(i).launch_time > 0]
        if late:
            raise ConfigError(
                f"explore_then_exploit needs every product at launch_time 0; "
                f"{late[0]!r} launches later"
            )
        self.gamma = float(gamma)
        self.ledger = EpochLedger()
        self._products = sorted_ids(catalog.ids)
        self._profits = np.array([catalog.profit_of(i) for i in self._products])

        def cycle_key(offer):
            t1 = [catalog.profit_of(i) for i in offer.tier(0)]
            t2 = [catalog.profit_of(i) for i in offer.tier(1)]
            return (
                min(t1, default=math.inf),
                min(t2, default=math.inf),
                tuple(map(str, sorted_ids(offer.tier(0)))),
                tuple(map(str, sorted_ids(offer.tier(1)))),
            )

        self._offers = sorted(enumerate_prefix_pair_offers(catalog), key=cycle_key)
        col = {i: j for j, i in enumerate(self._products)}
        self._member1 = np.zeros((len(self._offers), len(self._products)))
        self._member2 = np.zeros_like(self._member1)
        for row, offer in enumerate(self._offers):
            for i in offer.tier(0):
                self._member1[row, col[i]] = 1.0
            for i in offer.tier(1):
                self._member2[row, col[i]] = 1.0
        self._sizes = self._member1.sum(axis=1) + self._member2.sum(axis=1)
        self._tier1_sizes = self._member1.sum(axis=1)
        self._counts = np.zeros(len(self._offers))
        self._incumbent: int | None = None
        self._cursor = 0
        self._current: int | None = None
        self._at_boundary = False

    def _candidate_values(self) -> np.ndarray:
        v = np.array(
            [
                self.ledger.valuation_estimate(i) if self.ledger.has_estimate(i) else 0.0
                for i in self._products
            ]
        )
        rv = self._profits * v
        denom1 = 1.0 + self._member1 @ v
        denom2 = 1.0 + self._member2 @ v
        return (self._member1 @ rv) / denom1 + (self._member2 @ rv) / (denom1 * denom2)

    def _argmax(self, values: np.ndarray) -> int:
        order = np.lexsort((self._tier1_sizes, self._sizes, values))
        return int(order[-1])

    def _choose(self, t: int) -> None:
        values = self._candidate_values()
        if self._incumbent is None:
            self._incumbent = self._argmax(values)
        quota = max(self.gamma * math.log(t), 1.0)
        eligible = (values > values[self._incumbent]) & (self._counts < quota)
        chosen = None
        for step in range(len(self._offers)):
            idx = (self._cursor + step) % len(self._offers)
            if eligible[idx]:
                chosen = idx
                self._cursor = idx + 1
                break
        if chosen is None:
            self._incumbent = self._argmax(values)
            chosen = self._incumbent
        self._current = chosen
        self._at_boundary = False

    def offer(self, t: int) -> TieredOffer:
        if self._current is None or self._at_boundary:
            self._choose(t)
        return self._offers[self._current]

    def observe(self, t, offer, outcome) -> None:
        self.ledger.record_step(offer, outcome)
        self._counts[self._current] += 1
        if not outcome.is_purchase:
            self._at_boundary = True


_POLICIES = {
    cls.name: cls
    for cls in (
        OraclePolicy,
        UcbTieredPolicy,
        RandomTierLearningPolicy,
        ExploreThenExploitPolicy,
    )
}


def make_policy(name: str, catalog: Catalog, rng, **kwargs) -> Policy:
    """Construct a policy by registry name.

    Known names: oracle, ucb_tiered, random_tier, explore_then_exploit.
    """
    try:
        cls = _POLICIES[name]
    except KeyError:
        raise ConfigError(
            f"unknown policy {name!r}; expected one of {sorted(_POLICIES)}"
        ) from None
    return cls(catalog, rng, **kwargs)


# --- per-epoch cost of carrying one exploration product -------------------------


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean, its standard error, and the number of replications."""

    mean: float
    std_error: float
    n_epochs: int


def _augmented(catalog, base_offer, product_id, tier_index, comparator):
    if len(base_offer.tiers) != 2:
        raise InvalidOfferError(
            f"epoch regret needs a two-tier base offer, got {len(base_offer.tiers)} tiers"
        )
    if tier_index not in (0, 1):
        raise InvalidOfferError(f"tier_index must be 0 or 1, got {tier_index!r}")
    catalog.product(product_id)
    if product_id in base_offer.all_ids:
        raise InvalidOfferError(f"product {product_id!r} is already in the base offer")
    tiers = [set(base_offer.tier(0)), set(base_offer.tier(1))]
    tiers[tier_index].add(product_id)
    augmented = TieredOffer.two_tier(tiers[0], tiers[1])
    return augmented, (base_offer if comparator is None else comparator)


def epoch_regret_closed_form(
    catalog: Catalog,
    base_offer: TieredOffer,
    product_id: ProductId,
    tier_index: int,
    *,
    valuations: Mapping | None = None,
    comparator: TieredOffer | None = None,
) -> float:
    """Expected one-epoch regret of adding ``product_id`` to a tier of
    ``base_offer``, against ``comparator`` (default: the base offer itself).

    The epoch runs until its tier's terminating no-purchase: a tier-1 epoch
    ends when a customer fails to buy from tier 1 (mean length 1 + V1), a
    tier-2 epoch at a full no-purchase (mean length (1+V1)(1+V2)), with V_k
    summed over the augmented offer.  Termination is decided per customer
    i.i.d., so Wald's identity gives

        G = E[epoch length] * (E[R(comparator)] - E[R(augmented)]).
    """
    augmented, comp = _augmented(catalog, base_offer, product_id, tier_index, comparator)
    v1 = total_weight(augmented.tier(0), catalog, valuations)
    if tier_index == 0:
        mean_length = 1.0 + v1
    else:
        v2 = total_weight(augmented.tier(1), catalog, valuations)
        mean_length = (1.0 + v1) * (1.0 + v2)
    shortfall = expected_profit(comp, catalog, valuations) - expected_profit(
        augmented, catalog, valuations
    )
    return mean_length * shortfall


def epoch_regret_monte_carlo(
    catalog: Catalog,
    base_offer: TieredOffer,
    product_id: ProductId,
    tier_index: int,
    n_epochs: int,
    rng: np.random.Generator,
    *,
    valuations: Mapping | None = None,
    comparator: TieredOffer | None = None,
) -> MonteCarloEstimate:
    """Simulate the one-epoch regret of ``epoch_regret_closed_form``.

    Each epoch is a run of i.i.d. categorical outcomes under the augmented
    offer, stopped at the first epoch-terminating event; the per-epoch
    regret is (length * E[R(comparator)]) minus realized revenue.  Sampling
    splits each epoch into a geometric length, the terminal outcome, and
    the non-terminal outcomes — the joint law is unchanged, but every draw
    vectorizes.
    """
    if n_epochs < 2:
        raise ConfigError(f"need at least 2 epochs for a standard error, got {n_epochs}")
    augmented, comp = _augmented(catalog, base_offer, product_id, tier_index, comparator)
    e_comp = expected_profit(comp, catalog, valuations)
    tier1 = sorted_ids(augmented.tier(0))
    tier2 = sorted_ids(augmented.tier(1))
    w1 = np.array([_weight(catalog, valuations, i) for i in tier1])
    w2 = np.array([_weight(catalog, valuations, i) for i in tier2])
    d1 = 1.0 + w1.sum()
    d2 = 1.0 + w2.sum()
    probs = np.concatenate([w1 / d1, w2 / (d1 * d2), [1.0 / (d1 * d2)]])
    revenue = np.array(
        [catalog.profit_of(i) for i in tier1]
        + [catalog.profit_of(i) for i in tier2]
        + [0.0]
    )
    # terminal events: for a tier-1 epoch anything past tier 1 ends it, for a
    # tier-2 epoch only the full no-purchase does
    terminal = np.zeros(len(probs), dtype=bool)
    terminal[-1] = True
    if tier_index == 0:
        terminal[len(tier1):] = True
    p_end = float(probs[terminal].sum())

    lengths = rng.geometric(p_end, size=n_epochs)
    revenue_totals = np.zeros(n_epochs)
    if p_end < 1.0:
        inner = lengths - 1
        epoch_of = np.repeat(np.arange(n_epochs), inner)
        cum = np.cumsum(probs[~terminal] / (1.0 - p_end))
        draws = np.searchsorted(cum, rng.random(int(inner.sum())), side="right")
        revenue_totals += np.bincount(
            epoch_of, weights=revenue[~terminal][draws], minlength=n_epochs
        )
    cum_end = np.cumsum(probs[terminal] / p_end)
    end_draws = np.searchsorted(cum_end, rng.random(n_epochs), side="right")
    revenue_totals += revenue[terminal][end_draws]
    g = lengths * e_comp - revenue_totals
    return MonteCarloEstimate(
        float(g.mean()), float(g.std(ddof=1) / math.sqrt(n_epochs)), n_epochs
    )
