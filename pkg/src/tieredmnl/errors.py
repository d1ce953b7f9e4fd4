"""Exception types raised across the package."""


class TieredMnlError(Exception):
    """Base class for all package-specific errors."""


class InvalidCatalogError(TieredMnlError):
    """A product or catalog field violates its documented range or uniqueness."""


class UnknownProductError(TieredMnlError):
    """An offer or query referenced a product id the catalog does not contain."""

    def __init__(self, product_id, context=""):
        self.product_id = product_id
        msg = f"unknown product id {product_id!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class InvalidOfferError(TieredMnlError):
    """A tiered offer is structurally invalid (overlapping tiers, bad candidates)."""


class OutcomeMismatchError(TieredMnlError):
    """A recorded outcome is impossible under the offer it was recorded against."""


class NeverOfferedError(TieredMnlError):
    """An estimate was requested for a product with no completed epochs."""

    def __init__(self, product_id):
        self.product_id = product_id
        super().__init__(
            f"product {product_id!r} has no completed epochs; its estimate is undefined"
        )


class InstanceTooLargeError(TieredMnlError):
    """A brute-force enumeration would exceed the configured assignment cap."""


class ConfigError(TieredMnlError):
    """An experiment configuration violates the schema or is internally inconsistent."""
