"""Exception types shared across the package."""


class XTimeError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(XTimeError):
    """Model document violates the interchange schema (missing field, wrong type, unknown key)."""


class StructureError(XTimeError):
    """Tree node table is not a single-rooted binary tree (cycle, orphan, missing child)."""


class RangeError(XTimeError):
    """An index (feature_id, class_id, node id) is out of bounds for the model."""


class DimensionError(XTimeError):
    """Input vector length does not match the model or array geometry."""


class EmptyRangeError(XTimeError):
    """Path extraction produced an empty feature range; the tree is corrupt."""


class CapacityError(XTimeError):
    """Model does not fit the chip (tree too tall, too many features, or too many rows)."""


class MatchCountError(XTimeError):
    """A core search returned a different number of matches than trees mapped to it."""


class ShapeError(XTimeError):
    """Requested topology shape is not constructible (core count not a power of the arity)."""


class FixedPointOverflowError(OverflowError, XTimeError):
    """A fixed-point logit sum exceeded the flit format; the format was mis-sized at compile time."""


class IncompleteError(XTimeError):
    """Co-processor reduction invoked before all class sums for a sample arrived."""


class HazardError(XTimeError):
    """A pipeline stage or buffer contract was violated during simulation (internal assertion)."""


class ConfigError(XTimeError):
    """A configuration file is missing a required entry."""
