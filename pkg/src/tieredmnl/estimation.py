"""Epoch-based preference estimation from tiered purchase streams.

Showing a tier with a fixed product set repeatedly until its first
no-purchase makes the number of purchases of product i inside that window a
geometric variable on {0, 1, ...} with mean v_i, no matter what else the
tier contains.  The ledger therefore segments the step stream into per-tier
*epochs*:

* a tier-1 epoch covers consecutive steps and closes on the first step whose
  customer does not buy from tier 1;
* a tier-2 epoch covers the steps on which tier 2 is actually viewed (those
  without a tier-1 purchase) and closes when a customer leaves with nothing.

The closing step belongs to the epoch it closes.  Both tiers feed one shared
completed-epoch counter, and a tier's next epoch is labeled with the
counter's value after all closures of the current step are tallied — so a
label says how many epochs (of either tier) finished strictly before the
epoch began.  A tier's offered set is locked for the lifetime of each of its
epochs; changing it mid-epoch is an error because it would break the
geometric-count argument above.

Averaging a product's per-epoch purchase counts over every completed epoch
that offered it (either tier) estimates its preference weight.
``valuation_ucb`` adds the optimism margin the learning policies rely on,
and ``min_learning_epochs`` converts an (accuracy, confidence) target into
the number of epochs a product must be shown.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Mapping

from .errors import (
    ConfigError,
    InvalidOfferError,
    NeverOfferedError,
    OutcomeMismatchError,
)
from .model import NO_PURCHASE, ChoiceOutcome, ProductId, TieredOffer, sorted_ids

# Multiplier on ln(K * rounds + 1) / T_i inside the optimism margin.  The
# analysis behind the regret guarantee fixes this at 48; it is a module
# constant (with per-call override) so diagnostics can detect tampering.
UCB_CONFIDENCE_SCALE = 48.0


@dataclass(frozen=True)
class EpochRecord:
    """One completed epoch: its tier, label, locked offer, and purchases.

    ``steps`` lists the 1-based step indices the epoch covered (for tier 2,
    only the steps on which tier 2 was viewed).  ``purchases`` maps product
    id to how many of the epoch's steps bought it.
    """

    tier_index: int
    label: int
    offered: frozenset[ProductId]
    purchases: Mapping[ProductId, int]
    steps: tuple[int, ...]

    def purchases_of(self, product_id) -> int:
        return self.purchases.get(product_id, 0)

    @property
    def total_purchases(self) -> int:
        return sum(self.purchases.values())


@dataclass(frozen=True)
class StepEvents:
    """What one recorded step did to the epoch structure.

    ``closed`` holds the epochs the step completed (tier 1 first), and
    ``opened`` the (tier_index, label) pairs of their replacements.
    """

    t: int
    closed: tuple[EpochRecord, ...]
    opened: tuple[tuple[int, int], ...]

    def closed_tier(self, tier_index: int) -> EpochRecord | None:
        for record in self.closed:
            if record.tier_index == tier_index:
                return record
        return None

    @property
    def closed_tier1(self) -> EpochRecord | None:
        return self.closed_tier(0)

    @property
    def closed_tier2(self) -> EpochRecord | None:
        return self.closed_tier(1)


class _Open:
    """An epoch in progress; the offered set binds at its first viewed step."""

    __slots__ = ("label", "offered", "purchases", "steps")

    def __init__(self, label: int):
        self.label = label
        self.offered: frozenset | None = None
        self.purchases: dict = {}
        self.steps: list[int] = []


class _ProductStats:
    """Per-product rollup over completed epochs, one label/count track per
    tier, with cumulative sums so historical estimates are O(log n)."""

    __slots__ = ("labels", "counts", "cumsums", "epochs_total", "purchases_total", "launch_epoch")

    def __init__(self):
        self.labels: tuple[list[int], list[int]] = ([], [])
        self.counts: tuple[list[int], list[int]] = ([], [])
        self.cumsums: tuple[list[int], list[int]] = ([], [])
        self.epochs_total = 0
        self.purchases_total = 0
        self.launch_epoch: int | None = None


class EpochLedger:
    """Segments a recorded step stream into epochs and keeps the per-product
    purchase statistics the estimators read.

    ``completed`` is the shared epoch counter; ``steps_recorded`` the number
    of steps seen.  Only completed epochs contribute to estimates — an open
    epoch is invisible until it closes.
    """

    def __init__(self):
        self.completed = 0
        self.steps_recorded = 0
        self._open = [_Open(0), _Open(0)]
        self._closed: tuple[list[EpochRecord], list[EpochRecord]] = ([], [])
        self._stats: dict[ProductId, _ProductStats] = {}
        self._log: list[tuple] = []

    # --- recording -------------------------------------------------------

    def record_step(self, offer: TieredOffer, outcome: ChoiceOutcome) -> StepEvents:
        """Tally one customer's outcome under ``offer``.

        The offer must have exactly two tiers and, within each open epoch,
        the same tier contents as when the epoch first showed them.
        """
        if len(offer.tiers) != 2:
            raise InvalidOfferError(
                f"epoch accounting expects a two-tier offer, got {len(offer.tiers)} tiers"
            )
        if outcome.is_purchase:
            if outcome.tier not in (0, 1):
                raise OutcomeMismatchError(
                    f"outcome tier index {outcome.tier!r} is not a two-tier index"
                )
            if outcome.product not in offer.tier(outcome.tier):
                raise OutcomeMismatchError(
                    f"product {outcome.product!r} was not offered in tier {outcome.tier + 1}"
                )
        self.steps_recorded += 1
        t = self.steps_recorded
        tier2_viewed = not (outcome.is_purchase and outcome.tier == 0)
        viewed = (True, tier2_viewed)
        for k in (0, 1):
            if not viewed[k]:
                continue
            open_ = self._open[k]
            if open_.offered is None:
                open_.offered = offer.tier(k)
            elif open_.offered != offer.tier(k):
                raise InvalidOfferError(
                    f"tier {k + 1} changed during epoch {open_.label}: locked "
                    f"{sorted_ids(open_.offered)}, got {sorted_ids(offer.tier(k))}"
                )
            open_.steps.append(t)
        if outcome.is_purchase:
            purchases = self._open[outcome.tier].purchases
            purchases[outcome.product] = purchases.get(outcome.product, 0) + 1
        # tier 1 closes exactly when the customer moves past it; tier 2 when
        # the customer walks away entirely
        closes = (tier2_viewed, not outcome.is_purchase)
        closed_records = tuple(self._close(k) for k in (0, 1) if closes[k])
        opened = []
        for record in closed_records:
            self._open[record.tier_index] = _Open(self.completed)
            opened.append((record.tier_index, self.completed))
        self._log.append(
            (
                tuple(sorted_ids(offer.tier(0))),
                tuple(sorted_ids(offer.tier(1))),
                outcome.product,
                outcome.tier,
            )
        )
        return StepEvents(t, closed_records, tuple(opened))

    def _close(self, k: int) -> EpochRecord:
        open_ = self._open[k]
        record = EpochRecord(
            k, open_.label, open_.offered, dict(open_.purchases), tuple(open_.steps)
        )
        self._closed[k].append(record)
        self.completed += 1
        for i in sorted_ids(record.offered):
            st = self._stats.get(i)
            if st is None:
                st = self._stats[i] = _ProductStats()
            if st.launch_epoch is None or record.label < st.launch_epoch:
                st.launch_epoch = record.label
            n = record.purchases.get(i, 0)
            st.labels[k].append(record.label)
            st.counts[k].append(n)
            st.cumsums[k].append((st.cumsums[k][-1] if st.cumsums[k] else 0) + n)
            st.epochs_total += 1
            st.purchases_total += n
        return record

    # --- estimates -------------------------------------------------------

    def valuation_estimate(self, product_id, *, upto: int | None = None) -> float:
        """Mean purchases per completed epoch offering the product, pooled
        across both tiers.  With ``upto``, only epochs labeled < upto count."""
        st = self._stats.get(product_id)
        if st is None:
            raise NeverOfferedError(product_id)
        if upto is None:
            epochs, purchases = st.epochs_total, st.purchases_total
        else:
            epochs = purchases = 0
            for k in (0, 1):
                j = bisect.bisect_left(st.labels[k], upto)
                epochs += j
                if j:
                    purchases += st.cumsums[k][j - 1]
        if epochs == 0:
            raise NeverOfferedError(product_id)
        return purchases / epochs

    def valuation_ucb(
        self,
        product_id,
        epoch: int,
        n_products: int,
        confidence_scale: float | None = None,
    ) -> float:
        """Optimistic preference index at epoch ``epoch``:

            vbar + sqrt(vbar * pad) + pad,
            pad = scale * ln(n_products * (epoch - launch_epoch) + 1) / T_i

        where vbar and T_i pool every completed epoch that offered the
        product and launch_epoch is the label of the earliest one.  A
        negative epoch gap clamps to zero (margin vanishes rather than the
        logarithm going undefined).
        """
        scale = UCB_CONFIDENCE_SCALE if confidence_scale is None else confidence_scale
        st = self._stats.get(product_id)
        if st is None or st.epochs_total == 0:
            raise NeverOfferedError(product_id)
        mean = st.purchases_total / st.epochs_total
        rounds = max(epoch - st.launch_epoch, 0)
        pad = scale * math.log(n_products * rounds + 1.0) / st.epochs_total
        return mean + math.sqrt(mean * pad) + pad

    # --- accessors -------------------------------------------------------

    def has_estimate(self, product_id) -> bool:
        st = self._stats.get(product_id)
        return st is not None and st.epochs_total > 0

    def times_offered(self, product_id) -> int:
        """Completed epochs (both tiers) whose offer included the product."""
        st = self._stats.get(product_id)
        return 0 if st is None else st.epochs_total

    def purchase_total(self, product_id) -> int:
        st = self._stats.get(product_id)
        return 0 if st is None else st.purchases_total

    def launch_epoch(self, product_id) -> int | None:
        st = self._stats.get(product_id)
        return None if st is None else st.launch_epoch

    def epochs(self, tier_index: int) -> tuple[EpochRecord, ...]:
        return tuple(self._closed[tier_index])

    def labels(self, tier_index: int) -> tuple[int, ...]:
        return tuple(record.label for record in self._closed[tier_index])

    def product_epochs(self, product_id, tier_index: int) -> tuple[tuple[int, int], ...]:
        """(label, purchases) per completed epoch of one tier offering the
        product, in completion order."""
        st = self._stats.get(product_id)
        if st is None:
            return ()
        return tuple(zip(st.labels[tier_index], st.counts[tier_index]))

    def open_labels(self) -> tuple[int, int]:
        return (self._open[0].label, self._open[1].label)

    # --- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        """Raw step log; ``from_dict`` rebuilds the ledger by replaying it,
        so every derived structure is reconstructed rather than trusted."""
        return {
            "steps": [
                {"tier1": list(o1), "tier2": list(o2), "product": p, "tier": k}
                for o1, o2, p, k in self._log
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EpochLedger":
        if not isinstance(data, dict) or "steps" not in data:
            raise ConfigError("ledger document must be an object with a 'steps' list")
        ledger = cls()
        for row in data["steps"]:
            unknown = set(row) - {"tier1", "tier2", "product", "tier"}
            if unknown:
                raise ConfigError(f"unknown ledger step key {sorted(unknown)[0]!r}")
            offer = TieredOffer.two_tier(row.get("tier1", ()), row.get("tier2", ()))
            product = row.get("product")
            outcome = ChoiceOutcome(product, row.get("tier")) if product is not None else NO_PURCHASE
            ledger.record_step(offer, outcome)
        return ledger


# --- minimum-learning sizing ---------------------------------------------------


def min_learning_epochs(epsilon: float, alpha: float) -> int:
    """Epochs of exposure after which a preference estimate is within
    ``epsilon`` of the truth with probability at least 1 - ``alpha``:

        ceil( 192 * ln(2/alpha + 1) / (-1 + sqrt(1 + 4*epsilon))^2 )
    """
    if not epsilon > 0.0:
        raise ConfigError(f"accuracy epsilon must be > 0, got {epsilon!r}")
    if not 0.0 < alpha < 1.0:
        raise ConfigError(f"confidence alpha must lie in (0, 1), got {alpha!r}")
    root = -1.0 + math.sqrt(1.0 + 4.0 * epsilon)
    return math.ceil(192.0 * math.log(2.0 / alpha + 1.0) / root**2)


@dataclass(frozen=True)
class LearningCriterion:
    """An (epsilon, alpha) accuracy target and its epoch requirement."""

    epsilon: float
    alpha: float
    min_epochs: int

    @classmethod
    def from_accuracy(cls, epsilon: float, alpha: float) -> "LearningCriterion":
        return cls(epsilon, alpha, min_learning_epochs(epsilon, alpha))
