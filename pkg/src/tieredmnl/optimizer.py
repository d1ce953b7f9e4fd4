"""Exact profit maximization over tiered offers.

The search walks a structured family of offers instead of all subsets:

* Seed family: tier 1 takes a profit-descending prefix of X1, tier 2 a
  profit-descending prefix of whatever X2 has left.  With disjoint
  candidate sets this family provably contains an optimum (any product
  whose profit beats the offer's continuation value belongs in, anything
  below belongs out), and prefix sums make every pair O(1).
* Completion: when the candidate sets overlap, a shared product can be
  worth *demoting* to tier 2 even though a lower-profit product stays in
  tier 1, so prefix pairs alone can leave a gap.  What survives of the
  prefix structure: tier 2 is still a prefix of its available candidates,
  the tier-1 exclusives are still a prefix of X1\\X2, and every tier-1
  product earns at least the optimal value.  The completion therefore
  enumerates every subset of F = {shared products with profit above the
  seed maximum} as the shared part of tier 1 — exact, but exponential in
  |F|, so it is guarded by a work cap and skippable via ``exact=False``.

``brute_force_optimal`` enumerates every assignment outright (any number of
tiers) and serves as the reference oracle for the structured search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InstanceTooLargeError, InvalidOfferError, UnknownProductError
from .model import Catalog, TieredOffer, _weight, expected_profit, sorted_ids


def profit_order(ids: Iterable, catalog: Catalog) -> list:
    """Candidate order used throughout: profit descending, id ascending."""
    return sorted(ids, key=lambda i: (-catalog.profit_of(i), str(i)))


@dataclass(frozen=True)
class SolveResult:
    """An optimal offer, its expected profit, and per-tier profit cutoffs.

    ``thresholds[k]`` is a cutoff such that every product placed in tier k
    has profit >= thresholds[k]; an empty tier reports +inf.  For two-tier
    results the pair is non-increasing across non-empty tiers.
    """

    offer: TieredOffer
    expected_profit: float
    thresholds: tuple[float, ...]


def _thresholds(offer: TieredOffer, catalog: Catalog) -> tuple[float, ...]:
    out = []
    for tier in offer.tiers:
        out.append(min((catalog.profit_of(i) for i in tier), default=math.inf))
    # keep cutoffs non-increasing across non-empty tiers; lowering a cutoff
    # below the tier's minimum profit keeps it a valid cutoff
    prev = None
    for k, tier in enumerate(offer.tiers):
        if not tier:
            continue
        if prev is not None and out[k] > prev:
            out[k] = prev
        prev = out[k]
    return tuple(out)


def _candidate_arrays(order: Sequence, catalog: Catalog, valuations):
    r = np.array([catalog.profit_of(i) for i in order], dtype=float)
    v = np.array([_weight(catalog, valuations, i) for i in order], dtype=float)
    return r, v


def _prefix_sums(r: np.ndarray, v: np.ndarray):
    cv = np.concatenate(([0.0], np.cumsum(v)))
    crv = np.concatenate(([0.0], np.cumsum(r * v)))
    return cv, crv


def _solve_shared_order(order, catalog, valuations):
    """Both tiers draw from one profit-ordered list: tier 1 takes the first
    a products, tier 2 the next b, so offers map to windows (a, a+b)."""
    r, v = _candidate_arrays(order, catalog, valuations)
    cv, crv = _prefix_sums(r, v)
    denom1 = 1.0 + cv
    head = crv / denom1
    tail_v = cv[None, :] - cv[:, None]
    tail_rv = crv[None, :] - crv[:, None]
    # the a > stop triangle is masked below; its entries may divide by zero
    with np.errstate(divide="ignore", invalid="ignore"):
        e = head[:, None] + (tail_rv / (1.0 + tail_v)) / denom1[:, None]
    n = len(order)
    idx = np.arange(n + 1)
    e[idx[:, None] > idx[None, :]] = -np.inf
    flat = int(np.argmax(e))
    a, stop = divmod(flat, n + 1)
    return float(e.flat[flat]), order[:a], order[a:stop]


def _solve_disjoint(order1, order2, catalog, valuations):
    r1, v1 = _candidate_arrays(order1, catalog, valuations)
    r2, v2 = _candidate_arrays(order2, catalog, valuations)
    cv1, crv1 = _prefix_sums(r1, v1)
    cv2, crv2 = _prefix_sums(r2, v2)
    denom1 = 1.0 + cv1
    e = (crv1 / denom1)[:, None] + (crv2 / (1.0 + cv2))[None, :] / denom1[:, None]
    flat = int(np.argmax(e))
    a, b = divmod(flat, len(order2) + 1)
    return float(e.flat[flat]), order1[:a], order2[:b]


def _solve_general(order1, order2, catalog, valuations):
    """Prefix-pair walk with running sums; tier-2 prefixes skip products the
    current tier-1 prefix already took."""
    items2 = [
        (i, catalog.profit_of(i), _weight(catalog, valuations, i)) for i in order2
    ]
    best_value = -math.inf
    best = ((), ())
    sum_v1 = 0.0
    sum_rv1 = 0.0
    taken1 = set()
    for a in range(len(order1) + 1):
        if a:
            i = order1[a - 1]
            w = _weight(catalog, valuations, i)
            sum_v1 += w
            sum_rv1 += catalog.profit_of(i) * w
            taken1.add(i)
        denom1 = 1.0 + sum_v1
        head = sum_rv1 / denom1
        if head > best_value:
            best_value = head
            best = (order1[:a], ())
        sum_v2 = 0.0
        sum_rv2 = 0.0
        chosen: list = []
        for i, r, w in items2:
            if i in taken1:
                continue
            sum_v2 += w
            sum_rv2 += r * w
            chosen.append(i)
            e = head + (sum_rv2 / (1.0 + sum_v2)) / denom1
            if e > best_value:
                best_value = e
                best = (order1[:a], tuple(chosen))
    return best_value, best[0], best[1]


def _resolve_candidates(catalog, candidates, default):
    if candidates is None:
        return default
    cand = frozenset(candidates)
    for i in cand:
        catalog.product(i)  # raises UnknownProductError
    return cand


def _free_shared(shared, catalog, lower_bound):
    """Shared candidates that could strictly improve on ``lower_bound`` as
    tier-1 members.  Every tier-1 product at an optimum earns at least the
    optimal value, so anything at or below the bound can be dropped from the
    subset enumeration (zero-profit products never help)."""
    cutoff = max(lower_bound - 1e-9, 0.0)
    return [i for i in shared if catalog.profit_of(i) > cutoff]


def _completion_work(n_free: int, n_exc1: int, n_tier2: int) -> int:
    return (1 << n_free) * (n_exc1 + 1 + n_tier2)


def _completion(order2, exc1, free, catalog, valuations, seed_value):
    """Enumerate tier-1 = (exclusive prefix) + (subset P of ``free``) with
    tier 2 a prefix of order2 minus P.  Subsets step in Gray-code order so
    each differs from the last by one product; for a fixed P the best tier-2
    prefix does not depend on the exclusive prefix, so each subset costs one
    tier-2 walk plus one exclusive walk.

    Returns (value, tier1, tier2) when some offer beats ``seed_value``.
    """
    items2 = [
        (i, catalog.profit_of(i), _weight(catalog, valuations, i)) for i in order2
    ]
    cum_v = [0.0]
    cum_rv = [0.0]
    for i in exc1:
        w = _weight(catalog, valuations, i)
        cum_v.append(cum_v[-1] + w)
        cum_rv.append(cum_rv[-1] + catalog.profit_of(i) * w)
    free_items = [
        (i, catalog.profit_of(i), _weight(catalog, valuations, i)) for i in free
    ]
    in_p = [False] * len(free)
    pset: set = set()
    sum_vp = 0.0
    sum_rvp = 0.0
    best_value = seed_value
    best = None
    for g in range(1 << len(free)):
        if g:
            j = (g & -g).bit_length() - 1
            i, r, w = free_items[j]
            if in_p[j]:
                in_p[j] = False
                pset.discard(i)
                sum_vp -= w
                sum_rvp -= r * w
            else:
                in_p[j] = True
                pset.add(i)
                sum_vp += w
                sum_rvp += r * w
        tail_best = 0.0
        b_best = 0
        sv = 0.0
        srv = 0.0
        b = 0
        for i, r, w in items2:
            if i in pset:
                continue
            sv += w
            srv += r * w
            b += 1
            tail = srv / (1.0 + sv)
            if tail > tail_best:
                tail_best = tail
                b_best = b
        for a in range(len(exc1) + 1):
            value = (sum_rvp + cum_rv[a] + tail_best) / (1.0 + sum_vp + cum_v[a])
            if value > best_value:
                best_value = value
                best = (frozenset(pset), a, b_best)
    if best is None:
        return None
    pset, a, b = best
    tier1 = tuple(exc1[:a]) + tuple(i for i in free if i in pset)
    tier2 = tuple(i for i in order2 if i not in pset)[:b]
    return best_value, tier1, tier2


def solve_two_tier(
    catalog: Catalog,
    *,
    valuations: Mapping | None = None,
    candidates_tier1: Iterable | None = None,
    candidates_tier2: Iterable | None = None,
    exact: bool = True,
    max_exact_work: int = 20_000_000,
) -> SolveResult:
    """Two-tier optimum: prefix-pair seed plus the shared-subset completion.

    ``valuations`` substitutes the catalog's preference weights (it may
    contain optimistic values above 1); candidate overrides restrict the
    catalog's candidate sets, e.g. to the currently launched products.

    With ``exact`` (the default) the returned maximum equals the global
    maximum; the completion raises InstanceTooLargeError when its subset
    enumeration would exceed ``max_exact_work`` steps, which happens once
    many shared products outearn the seed value.  ``exact=False`` returns
    the best prefix-pair offer — already optimal for disjoint candidate
    sets, and in the rare overlap corners short by at most a sliver; the
    simulation loop runs with it so policies and their regret benchmark
    price offers on one family.
    """
    x1 = _resolve_candidates(catalog, candidates_tier1, catalog.candidates_tier1)
    x2 = _resolve_candidates(catalog, candidates_tier2, catalog.candidates_tier2)
    order1 = profit_order(x1, catalog)
    order2 = profit_order(x2, catalog)
    if x1 == x2:
        value, tier1, tier2 = _solve_shared_order(order1, catalog, valuations)
    elif x1.isdisjoint(x2):
        value, tier1, tier2 = _solve_disjoint(order1, order2, catalog, valuations)
    else:
        value, tier1, tier2 = _solve_general(order1, order2, catalog, valuations)
    if exact and not x1.isdisjoint(x2):
        exc1 = profit_order(x1 - x2, catalog)
        free = _free_shared(profit_order(x1 & x2, catalog), catalog, value)
        work = _completion_work(len(free), len(exc1), len(order2))
        if work > max_exact_work:
            raise InstanceTooLargeError(
                f"exact completion would take ~{work} steps over {len(free)} "
                f"candidate splits (cap {max_exact_work}); restrict the "
                "candidate sets or pass exact=False"
            )
        refined = _completion(order2, exc1, free, catalog, valuations, value)
        if refined is not None:
            value, tier1, tier2 = refined
    offer = TieredOffer.two_tier(tier1, tier2)
    value = expected_profit(offer, catalog, valuations)
    return SolveResult(offer, value, _thresholds(offer, catalog))


def solve_two_tier_naive(
    catalog: Catalog,
    *,
    valuations: Mapping | None = None,
    candidates_tier1: Iterable | None = None,
    candidates_tier2: Iterable | None = None,
    exact: bool = True,
    max_exact_work: int = 20_000_000,
) -> SolveResult:
    """The same candidate family as ``solve_two_tier``, each offer priced
    from scratch with no running sums.  Slow validation twin.
    """
    x1 = _resolve_candidates(catalog, candidates_tier1, catalog.candidates_tier1)
    x2 = _resolve_candidates(catalog, candidates_tier2, catalog.candidates_tier2)
    order1 = profit_order(x1, catalog)
    order2 = profit_order(x2, catalog)
    best_value = -math.inf
    best = None

    def consider(tier1, tier2):
        nonlocal best_value, best
        offer = TieredOffer.two_tier(tier1, tier2)
        value = expected_profit(offer, catalog, valuations)
        if value > best_value:
            best_value = value
            best = offer

    for a in range(len(order1) + 1):
        taken = set(order1[:a])
        rest = [i for i in order2 if i not in taken]
        for b in range(len(rest) + 1):
            consider(order1[:a], rest[:b])
    if exact and not x1.isdisjoint(x2):
        exc1 = profit_order(x1 - x2, catalog)
        free = _free_shared(profit_order(x1 & x2, catalog), catalog, best_value)
        work = _completion_work(len(free), len(exc1), len(order2))
        if work > max_exact_work:
            raise InstanceTooLargeError(
                f"exact completion would take ~{work} steps over {len(free)} "
                f"candidate splits (cap {max_exact_work}); restrict the "
                "candidate sets or pass exact=False"
            )
        for mask in range(1 << len(free)):
            p = [i for j, i in enumerate(free) if mask >> j & 1]
            rest = [i for i in order2 if i not in p]
            for a in range(len(exc1) + 1):
                for b in range(len(rest) + 1):
                    consider(list(exc1[:a]) + p, rest[:b])
    return SolveResult(best, best_value, _thresholds(best, catalog))


def solve_tier1_given_tier2(
    catalog: Catalog,
    tier2: Iterable,
    *,
    valuations: Mapping | None = None,
    candidates_tier1: Iterable | None = None,
    forced_tier1: Iterable = (),
) -> tuple[frozenset, float]:
    """Best tier-1 selection when the tier-2 set is held fixed.

    The free choice is a profit prefix of the remaining candidates, which is
    exact here: with tier 2 frozen, a product belongs in tier 1 iff its
    profit beats the resulting offer value.  ``forced_tier1`` products are
    included unconditionally (exploration slots) and need not be tier-1
    candidates.  Returns (tier-1 set including forced, expected profit of
    the combined offer).
    """
    tier2 = frozenset(tier2)
    forced = frozenset(forced_tier1)
    if forced & tier2:
        raise InvalidOfferError("forced tier-1 products overlap tier 2")
    x1 = _resolve_candidates(catalog, candidates_tier1, catalog.candidates_tier1)
    order = profit_order(x1 - tier2 - forced, catalog)
    e2 = expected_profit(TieredOffer((tier2,)), catalog, valuations)
    sum_v = 0.0
    sum_rv = 0.0
    for i in sorted_ids(forced):
        w = _weight(catalog, valuations, i)
        sum_v += w
        sum_rv += catalog.profit_of(i) * w
    best_a = 0
    best_value = (sum_rv + e2) / (1.0 + sum_v)
    for a, i in enumerate(order, start=1):
        w = _weight(catalog, valuations, i)
        sum_v += w
        sum_rv += catalog.profit_of(i) * w
        value = (sum_rv + e2) / (1.0 + sum_v)
        if value > best_value:
            best_value = value
            best_a = a
    return frozenset(order[:best_a]) | forced, best_value


# --- exhaustive reference ----------------------------------------------------


def _subset_sums(values: np.ndarray) -> np.ndarray:
    """sums[m] = sum of values[j] over the set bits of mask m."""
    n = len(values)
    out = np.zeros(1 << n)
    for j in range(n):
        k = 1 << j
        out[k : 2 * k] = out[:k] + values[j]
    return out


def _brute_force_two_tier(catalog, sets, valuations, cap):
    order1 = sorted_ids(sets[0])
    order2 = sorted_ids(sets[1])
    n1, n2 = len(order1), len(order2)
    if 1 << (n1 + n2) > 4 * cap:
        raise InstanceTooLargeError(
            f"2^{n1 + n2} subset pairs exceed the cap of {4 * cap}"
        )
    union = sorted_ids(set(order1) | set(order2))
    bit = {i: j for j, i in enumerate(union)}

    def tier_arrays(order):
        r = np.array([catalog.profit_of(i) for i in order])
        v = np.array([_weight(catalog, valuations, i) for i in order])
        masks = _subset_sums(np.array([float(1 << bit[i]) for i in order]))
        return _subset_sums(v), _subset_sums(r * v), masks.astype(np.int64)

    sv1, srv1, gm1 = tier_arrays(order1)
    sv2, srv2, gm2 = tier_arrays(order2)
    e = (srv1 / (1.0 + sv1))[:, None] + (srv2 / (1.0 + sv2))[None, :] / (1.0 + sv1)[
        :, None
    ]
    e[(gm1[:, None] & gm2[None, :]) != 0] = -np.inf
    flat = int(np.argmax(e))
    m1, m2 = divmod(flat, 1 << n2)
    tier1 = [i for j, i in enumerate(order1) if m1 >> j & 1]
    tier2 = [i for j, i in enumerate(order2) if m2 >> j & 1]
    return TieredOffer.two_tier(tier1, tier2)


def _brute_force_recursive(catalog, sets, valuations, cap):
    num_tiers = len(sets)
    union = sorted_ids(set().union(*sets))
    items = []
    for i in union:
        tiers = [k for k in range(num_tiers) if i in sets[k]]
        if tiers:
            items.append((catalog.profit_of(i), _weight(catalog, valuations, i), tiers, i))
    count = 1
    for _, _, tiers, _ in items:
        count *= 1 + len(tiers)
        if count > cap:
            raise InstanceTooLargeError(
                f"assignment count exceeds the cap of {cap}"
            )
    sum_v = [0.0] * num_tiers
    sum_rv = [0.0] * num_tiers
    assign = [None] * len(items)
    best = [-math.inf, None]

    def evaluate():
        total = 0.0
        reach = 1.0
        for k in range(num_tiers):
            denom = 1.0 + sum_v[k]
            total += reach * sum_rv[k] / denom
            reach /= denom
        if total > best[0]:
            best[0] = total
            best[1] = assign.copy()

    def recurse(idx):
        if idx == len(items):
            evaluate()
            return
        r, v, tiers, _ = items[idx]
        assign[idx] = None
        recurse(idx + 1)
        for k in tiers:
            sum_v[k] += v
            sum_rv[k] += r * v
            assign[idx] = k
            recurse(idx + 1)
            sum_v[k] -= v
            sum_rv[k] -= r * v
        assign[idx] = None

    recurse(0)
    tiers: list[set] = [set() for _ in range(num_tiers)]
    for slot, (_, _, _, i) in zip(best[1], items):
        if slot is not None:
            tiers[slot].add(i)
    return TieredOffer(tuple(frozenset(t) for t in tiers))


def brute_force_optimal(
    catalog: Catalog,
    num_tiers: int = 2,
    *,
    candidate_sets: Sequence[Iterable] | None = None,
    valuations: Mapping | None = None,
    max_assignments: int = 2_000_000,
) -> SolveResult:
    """Exhaustive search over every disjoint assignment of candidates to tiers.

    With ``candidate_sets`` omitted, two tiers use the catalog's candidate
    sets and other tier counts make every product a candidate for every
    tier.  Raises InstanceTooLargeError rather than start an enumeration
    larger than ``max_assignments``.
    """
    if num_tiers < 1:
        raise InvalidOfferError("num_tiers must be >= 1")
    if candidate_sets is None:
        if num_tiers == 2:
            sets = [catalog.candidates_tier1, catalog.candidates_tier2]
        else:
            sets = [catalog.ids] * num_tiers
    else:
        if len(candidate_sets) != num_tiers:
            raise InvalidOfferError(
                f"expected {num_tiers} candidate sets, got {len(candidate_sets)}"
            )
        sets = [
            _resolve_candidates(catalog, s if s is not None else (), frozenset())
            for s in candidate_sets
        ]
    if num_tiers == 2:
        offer = _brute_force_two_tier(catalog, sets, valuations, max_assignments)
    else:
        offer = _brute_force_recursive(catalog, sets, valuations, max_assignments)
    value = expected_profit(offer, catalog, valuations)
    return SolveResult(offer, value, _thresholds(offer, catalog))


def enumerate_prefix_pair_offers(catalog: Catalog) -> list[TieredOffer]:
    """All two-tier prefix-pair offers, in (tier-1 prefix, tier-2 prefix)
    order with duplicates removed.  This is the candidate family the
    optimum provably lives in."""
    order1 = profit_order(catalog.candidates_tier1, catalog)
    order2 = profit_order(catalog.candidates_tier2, catalog)
    offers = []
    seen = set()
    for a in range(len(order1) + 1):
        taken = frozenset(order1[:a])
        rest = [i for i in order2 if i not in taken]
        for b in range(len(rest) + 1):
            offer = TieredOffer((taken, frozenset(rest[:b])))
            if offer not in seen:
                seen.add(offer)
                offers.append(offer)
    return offers


# --- offer structure predicates -----------------------------------------------


def is_profit_ordered_set(tier: Iterable, candidate_set: Iterable, catalog: Catalog) -> bool:
    """True iff every product in ``tier`` earns at least as much as every
    candidate left out: min profit inside >= max profit outside."""
    tier = frozenset(tier)
    candidates = frozenset(candidate_set)
    if not tier <= candidates:
        raise InvalidOfferError("tier must be a subset of its candidate set")
    outside = candidates - tier
    if not tier or not outside:
        return True
    lowest_in = min(catalog.profit_of(i) for i in tier)
    highest_out = max(catalog.profit_of(i) for i in outside)
    return lowest_in >= highest_out


def is_profit_ordered_by_tier(offer: TieredOffer, catalog: Catalog) -> bool:
    """True iff no tier-1 product earns less than some tier-2 candidate that
    was left out of the offer entirely.

    Left-out candidates are X2 minus both tiers: a product already shown in
    tier 1 is not an available tier-2 candidate, since tiers are disjoint.
    """
    s1 = offer.tier(0)
    if not s1:
        return True
    outside = catalog.candidates_tier2 - offer.tier(1) - s1
    if not outside:
        return True
    lowest_in = min(catalog.profit_of(i) for i in s1)
    highest_out = max(catalog.profit_of(i) for i in outside)
    return lowest_in >= highest_out


# --- new-product placement ----------------------------------------------------


def suffix_profits(
    offer: TieredOffer, catalog: Catalog, valuations: Mapping | None = None
) -> list[float]:
    """Expected profit of each tier suffix (S_j, ..., S_W) of ``offer``.

    At an optimum these are non-increasing in j: dropping the leading tiers
    only removes first-look revenue.
    """
    return [
        expected_profit(TieredOffer(offer.tiers[j:]), catalog, valuations)
        for j in range(len(offer.tiers))
    ]


@dataclass(frozen=True)
class TierPlacement:
    """Where a new product can land in the re-solved optimum.

    ``earliest_tier`` is the smallest admissible 0-based tier index; the
    product is guaranteed absent from all earlier tiers.  ``excluded`` means
    its profit is below even the last tier's continuation value, so it will
    not be offered at all.  Boundary ties count as not excluded.
    """

    excluded: bool
    earliest_tier: int | None


def predict_new_product_tier(
    suffix_values: Sequence[float], profit: float
) -> TierPlacement:
    """Predict placement of a profit-``profit`` product from the incumbent
    optimum's suffix values, without re-solving."""
    if not suffix_values:
        raise ValueError("need at least one tier suffix value")
    for a, b in zip(suffix_values, suffix_values[1:]):
        if b > a + 1e-9:
            raise ValueError("suffix values must be non-increasing by tier")
    if profit < suffix_values[-1]:
        return TierPlacement(True, None)
    for k, value in enumerate(suffix_values):
        if profit >= value:
            return TierPlacement(False, k)
    return TierPlacement(False, len(suffix_values) - 1)
