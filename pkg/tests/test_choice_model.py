"""Choice-model tests: closed-form tier probabilities, expected profit,
sampling, and catalog (de)serialization.

Numeric expectations are hand-computed fractions for two fixed catalogs;
structural properties run over seeded random instances.
"""

import json
import math

import numpy as np
import pytest

from tieredmnl.errors import (
    InvalidCatalogError,
    InvalidOfferError,
    UnknownProductError,
)
from tieredmnl.model import (
    NO_PURCHASE,
    Catalog,
    ChoiceOutcome,
    ChoiceSampler,
    Product,
    TieredOffer,
    catalog_from_dict,
    catalog_to_dict,
    expected_profit,
    expected_profit_single_tier,
    load_catalog,
    purchase_probabilities,
    sample_choice,
    save_catalog,
    sorted_ids,
    total_weight,
)
from tieredmnl.rng import BufferedRandom


def two_product_catalog() -> Catalog:
    return Catalog((Product(1, 10.0, 0.1), Product(2, 1.0, 1.0)))


def random_catalog(rng: np.random.Generator, n_max: int = 7) -> Catalog:
    n = int(rng.integers(1, n_max + 1))
    return Catalog(
        tuple(
            Product(f"p{k}", float(rng.uniform(0, 5)), float(rng.uniform(0, 1)))
            for k in range(n)
        )
    )


def random_offer(catalog: Catalog, rng: np.random.Generator, tiers: int = 2) -> TieredOffer:
    ids = sorted_ids(catalog.ids)
    assign = rng.integers(0, tiers + 1, size=len(ids))
    return TieredOffer(
        tuple(
            frozenset(i for i, a in zip(ids, assign) if a == k + 1)
            for k in range(tiers)
        )
    )


class TestExpectedProfit:
    """Closed-form value of a tiered offer against hand-worked fractions."""

    def test_two_products_single_tier(self):
        """(10*0.1 + 1*1) / (1 + 0.1 + 1) = 2/2.1."""
        catalog = two_product_catalog()
        assert expected_profit_single_tier([1, 2], catalog) == pytest.approx(
            2.0 / 2.1, abs=1e-12
        )

    def test_two_products_split_tiers(self):
        """10*(0.1/1.1) + (1/1.1)*(1/2) = 15/11: splitting beats pooling."""
        catalog = two_product_catalog()
        split = expected_profit(TieredOffer.two_tier([1], [2]), catalog)
        assert split == pytest.approx(15.0 / 11.0, abs=1e-12)
        assert split > expected_profit_single_tier([1, 2], catalog)

    def test_second_catalog_by_fractions(self):
        """r=(4,2), v=(1/2,1/4): pooled 10/7; split ({a},{b}) = 4/3+4/15 = 8/5."""
        catalog = Catalog((Product("a", 4.0, 0.5), Product("b", 2.0, 0.25)))
        assert expected_profit_single_tier(["a", "b"], catalog) == pytest.approx(
            10.0 / 7.0, abs=1e-12
        )
        split = expected_profit(TieredOffer.two_tier(["a"], ["b"]), catalog)
        assert split == pytest.approx(8.0 / 5.0, abs=1e-12)

    def test_three_tiers_discount_chain(self):
        """Each tier's revenue is reached with probability prod 1/(1+V_k)."""
        catalog = Catalog(
            (Product("a", 3.0, 0.5), Product("b", 2.0, 1.0), Product("c", 1.0, 0.25))
        )
        offer = TieredOffer((frozenset("a"), frozenset("b"), frozenset("c")))
        # 3*(0.5/1.5) + (1/1.5)*(2*1/2) + (1/1.5)*(1/2)*(0.25/1.25)
        want = 1.0 + 2.0 / 3.0 + (1.0 / 3.0) * 0.2
        assert expected_profit(offer, catalog) == pytest.approx(want, abs=1e-12)

    def test_empty_offer_is_worthless(self):
        catalog = two_product_catalog()
        assert expected_profit(TieredOffer.empty(), catalog) == 0.0
        assert expected_profit(TieredOffer.two_tier([], []), catalog) == 0.0

    def test_matches_probability_weighted_profit(self):
        """E[profit] = sum_i r_i P(buy i), on random offers."""
        rng = np.random.default_rng(11)
        for _ in range(60):
            catalog = random_catalog(rng)
            offer = random_offer(catalog, rng)
            dist = purchase_probabilities(offer, catalog)
            want = sum(
                catalog.profit_of(i) * p for i, p in dist.purchase.items()
            )
            assert expected_profit(offer, catalog) == pytest.approx(want, abs=1e-12)

    def test_valuation_override_matches_catalog_weights(self):
        rng = np.random.default_rng(12)
        catalog = random_catalog(rng)
        offer = random_offer(catalog, rng)
        override = {p.id: p.valuation for p in catalog.products}
        assert expected_profit(offer, catalog, override) == expected_profit(
            offer, catalog
        )

    def test_optimistic_override_above_one_is_legal(self):
        """Learning feeds optimistic weights > 1; the closed form accepts them."""
        catalog = Catalog((Product("a", 2.0, 0.5),))
        offer = TieredOffer.two_tier(["a"], [])
        got = expected_profit(offer, catalog, {"a": 3.0})
        assert got == pytest.approx(2.0 * 3.0 / 4.0, abs=1e-12)


class TestPurchaseProbabilities:
    def test_hand_traced_split_offer(self):
        """({1},{2}): p1=1/11, p2=5/11, none=5/11."""
        catalog = two_product_catalog()
        dist = purchase_probabilities(TieredOffer.two_tier([1], [2]), catalog)
        assert dist.probability(1) == pytest.approx(1.0 / 11.0, abs=1e-12)
        assert dist.probability(2) == pytest.approx(5.0 / 11.0, abs=1e-12)
        assert dist.no_purchase == pytest.approx(5.0 / 11.0, abs=1e-12)
        assert dist.tier_no_purchase == pytest.approx((1.0 / 1.1, 0.5), abs=1e-12)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(21)
        for _ in range(80):
            catalog = random_catalog(rng)
            offer = random_offer(catalog, rng, tiers=int(rng.integers(1, 4)))
            dist = purchase_probabilities(offer, catalog)
            total = dist.no_purchase + sum(dist.purchase.values())
            assert total == pytest.approx(1.0, abs=1e-12)
            assert dist.no_purchase == pytest.approx(
                math.prod(dist.tier_no_purchase), abs=1e-12
            )

    def test_earlier_tier_gets_the_demand(self):
        """The same product keeps strictly more probability in tier 1."""
        catalog = Catalog((Product("a", 1.0, 0.4), Product("b", 1.0, 0.8)))
        front = purchase_probabilities(TieredOffer.two_tier(["a"], ["b"]), catalog)
        back = purchase_probabilities(TieredOffer.two_tier(["b"], ["a"]), catalog)
        assert front.probability("a") > back.probability("a")

    def test_unknown_product_in_offer(self):
        catalog = two_product_catalog()
        with pytest.raises(UnknownProductError):
            purchase_probabilities(TieredOffer.two_tier([1], ["ghost"]), catalog)

    def test_missing_override_entry(self):
        catalog = two_product_catalog()
        with pytest.raises(UnknownProductError):
            expected_profit(TieredOffer.two_tier([1], [2]), catalog, {1: 0.1})

    def test_negative_override_rejected(self):
        catalog = two_product_catalog()
        with pytest.raises(InvalidOfferError):
            expected_profit(TieredOffer.two_tier([1], []), catalog, {1: -0.5})


class TestTieredOffer:
    def test_tiers_must_be_disjoint(self):
        with pytest.raises(InvalidOfferError):
            TieredOffer.two_tier(["a"], ["a"])

    def test_accessors(self):
        offer = TieredOffer.two_tier(["a"], ["b", "c"])
        assert offer.tier1 == frozenset(["a"])
        assert offer.tier2 == frozenset(["b", "c"])
        assert offer.tier(5) == frozenset()
        assert offer.all_ids == frozenset(["a", "b", "c"])
        assert not offer.is_empty
        assert TieredOffer.empty().is_empty

    def test_total_weight_sums_valuations(self):
        catalog = two_product_catalog()
        assert total_weight([1, 2], catalog) == pytest.approx(1.1, abs=1e-12)


class TestProductValidation:
    def test_valuation_bounds_inclusive(self):
        Product("edge", 1.0, 1.0)  # the closed forms allow weight exactly 1
        Product("zero", 1.0, 0.0)
        with pytest.raises(InvalidCatalogError):
            Product("hot", 1.0, 1.0 + 1e-9)
        with pytest.raises(InvalidCatalogError):
            Product("neg", 1.0, -0.1)

    def test_profit_must_be_nonnegative(self):
        with pytest.raises(InvalidCatalogError):
            Product("bad", -0.01, 0.5)

    def test_duplicate_ids_rejected(self):
        with pytest.raises(InvalidCatalogError):
            Catalog((Product("a", 1.0, 0.5), Product("a", 2.0, 0.5)))

    def test_candidate_sets_must_reference_known_products(self):
        with pytest.raises(InvalidCatalogError):
            Catalog((Product("a", 1.0, 0.5),), candidates_tier1=["ghost"])

    def test_visible_at_filters_by_launch_time(self):
        catalog = Catalog(
            (Product("a", 1.0, 0.5), Product("b", 1.0, 0.5, launch_time=10))
        )
        assert catalog.visible_at(9) == frozenset(["a"])
        assert catalog.visible_at(10) == frozenset(["a", "b"])


class TestSampling:
    def test_empirical_frequencies_match_closed_form(self):
        """200k seeded draws agree with the marginal law within 4 sigma."""
        catalog = Catalog(
            (Product("a", 1.0, 0.3), Product("b", 1.0, 0.6), Product("c", 1.0, 0.2))
        )
        offer = TieredOffer.two_tier(["a", "b"], ["c"])
        dist = purchase_probabilities(offer, catalog)
        sampler = ChoiceSampler(offer, catalog)
        rng = BufferedRandom(np.random.default_rng(31))
        n = 200_000
        counts = {"a": 0, "b": 0, "c": 0, None: 0}
        for _ in range(n):
            counts[sampler.sample(rng).product] += 1
        for i in ("a", "b", "c"):
            p = dist.probability(i)
            tol = 4.0 * math.sqrt(p * (1 - p) / n)
            assert counts[i] / n == pytest.approx(p, abs=tol)
        assert counts[None] / n == pytest.approx(
            dist.no_purchase, abs=4.0 * math.sqrt(dist.no_purchase / n)
        )

    def test_sample_choice_matches_prepared_sampler(self):
        catalog = two_product_catalog()
        offer = TieredOffer.two_tier([1], [2])
        a = BufferedRandom(np.random.default_rng(7))
        b = BufferedRandom(np.random.default_rng(7))
        sampler = ChoiceSampler(offer, catalog)
        for _ in range(500):
            assert sample_choice(offer, catalog, a) == sampler.sample(b)

    def test_zero_weight_product_never_chosen(self):
        catalog = Catalog((Product("a", 1.0, 0.0), Product("b", 1.0, 0.9)))
        offer = TieredOffer.two_tier(["a", "b"], [])
        assert purchase_probabilities(offer, catalog).probability("a") == 0.0
        rng = BufferedRandom(np.random.default_rng(41))
        sampler = ChoiceSampler(offer, catalog)
        assert all(sampler.sample(rng).product != "a" for _ in range(5000))

    def test_outcome_fields(self):
        assert not NO_PURCHASE.is_purchase
        assert NO_PURCHASE.product is None
        hit = ChoiceOutcome("a", 1)
        assert hit.is_purchase and hit.tier == 1


class TestCatalogSerialization:
    def test_round_trip_preserves_everything(self):
        catalog = Catalog(
            (
                Product("a", 1.5, 0.25, launch_time=3),
                Product("b", 2.0, 0.75),
            ),
            candidates_tier1=["a"],
            candidates_tier2=["a", "b"],
        )
        clone = catalog_from_dict(catalog_to_dict(catalog))
        assert clone.products == catalog.products
        assert clone.candidates_tier1 == catalog.candidates_tier1
        assert clone.candidates_tier2 == catalog.candidates_tier2

    def test_file_round_trip(self, tmp_path):
        catalog = two_product_catalog()
        path = tmp_path / "cat.json"
        save_catalog(catalog, path)
        assert load_catalog(path).products == catalog.products

    def test_unknown_keys_rejected(self):
        with pytest.raises(InvalidCatalogError):
            catalog_from_dict({"products": [], "extra": 1})
        with pytest.raises(InvalidCatalogError):
            catalog_from_dict(
                {"products": [{"id": 1, "profit": 1, "valuation": 0.5, "color": "red"}]}
            )

    def test_missing_fields_named(self):
        with pytest.raises(InvalidCatalogError, match="valuation"):
            catalog_from_dict({"products": [{"id": 1, "profit": 1.0}]})

    def test_non_numeric_field_named(self):
        with pytest.raises(InvalidCatalogError, match="product 1"):
            catalog_from_dict(
                {"products": [{"id": 1, "profit": "ten", "valuation": 0.5}]}
            )

    def test_not_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(InvalidCatalogError):
            load_catalog(path)

    def test_packaged_example_catalog(self):
        from tieredmnl.verify import EXAMPLE_CATALOG

        catalog = load_catalog(EXAMPLE_CATALOG)
        assert {p.id for p in catalog.products} == {1, 2}
        data = json.loads(EXAMPLE_CATALOG.read_text())
        assert len(data["products"]) == 2
