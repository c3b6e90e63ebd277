"""Exception types shared across the annotation toolkit."""


class ForgetextError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(ForgetextError):
    """Two rasters that must share a frame do not."""


class EmptyRegion(ForgetextError):
    """A pixel set that must contain at least one pixel is empty."""


class NoPairs(ForgetextError):
    """No co-occurring in-region pixel pair exists in any direction."""


class EmptyBoundary(ForgetextError):
    """The inner or outer boundary band around a mask is empty."""


class DegenerateHull(ForgetextError):
    """A landmark subset spans zero area (collinear or repeated points)."""


class EmptyList(ForgetextError):
    """A selection was requested from an empty forgery region list."""


class EmptyRegionMap(ForgetextError):
    """A facial region in the partition has zero pixels."""


class RegionTouchesBorder(ForgetextError):
    """Poisson blending needs the region strictly inside the frame."""


class UnknownType(ForgetextError):
    """A forgery-type name outside the fixed five."""


class SchemaError(ForgetextError):
    """A refinement response failed validation.

    ``reason`` is machine-readable: one of no_json, bad_payload,
    label_mismatch, caption_count, missing_phrase.
    """

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason}: {detail}" if detail else reason)


class AuthError(ForgetextError):
    """The refinement service rejected the credential (non-retryable)."""


class LengthMismatch(ForgetextError):
    """Paired sequences have different lengths."""


class EmptyInput(ForgetextError):
    """An aggregate was requested over zero records."""


class EmptyDataset(ForgetextError):
    """Ingestion found no complete real/fake/landmark triples."""
