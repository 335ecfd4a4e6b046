"""Primitive registry: function signatures and terminal domains."""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union
import math

from src.models import Channel, GpType, Layer
from src.errors import ConfigError


I = GpType.IMAGE
F = GpType.FEATURES
P = GpType.PROBS


@dataclass(frozen=True)
class PrimitiveSignature:
    """Typed signature of a function node."""
    name: str
    child_types: tuple[GpType, ...]
    return_type: GpType
    layer: Layer
    # Keyword used when rendering each parameter child, None for data children
    arg_keys: tuple[Optional[str], ...] = ()

    @property
    def arity(self) -> int:
        return len(self.child_types)

    def key_for(self, position: int) -> Optional[str]:
        if not self.arg_keys:
            return None
        return self.arg_keys[position]


def _sig(
    name: str,
    children: tuple[GpType, ...],
    ret: GpType,
    layer: Layer,
    keys: tuple[Optional[str], ...] = (),
) -> PrimitiveSignature:
    return PrimitiveSignature(name, children, ret, layer, keys or (None,) * len(children))


_FILTERS_UNARY = (
    "Mean", "Median", "Min", "Max", "Lap", "LoG1", "LoG2", "Sobel",
    "Sqrt", "ReLU", "HOG_F", "LBP_F",
)
_EXTRACTORS_UNARY = ("Hist", "HOG", "LBP", "SIFT", "LBP_FE", "HOG_FE", "Sobel_FE")

PRIMITIVES: dict[str, PrimitiveSignature] = {}

for _name in _FILTERS_UNARY:
    PRIMITIVES[_name] = _sig(_name, (I,), I, Layer.FILTERING)
PRIMITIVES["Gau"] = _sig("Gau", (I, GpType.SIGMA), I, Layer.FILTERING, (None, "sigma"))
PRIMITIVES["GauD"] = _sig(
    "GauD", (I, GpType.SIGMA, GpType.ORDER, GpType.ORDER), I, Layer.FILTERING,
    (None, "sigma", "o1", "o2"),
)
PRIMITIVES["Gabor"] = _sig(
    "Gabor", (I, GpType.ORIENTATION, GpType.FREQUENCY), I, Layer.FILTERING,
    (None, "theta", "f"),
)
PRIMITIVES["Add_MaxP"] = _sig("Add_MaxP", (I, I), I, Layer.FILTERING)
PRIMITIVES["Sub_MaxP"] = _sig("Sub_MaxP", (I, I), I, Layer.FILTERING)

for _name in _EXTRACTORS_UNARY:
    PRIMITIVES[_name] = _sig(_name, (I,), F, Layer.FEATURE_EXTRACTION)
PRIMITIVES["Conca"] = _sig("Conca", (I, I), F, Layer.FEATURE_EXTRACTION)
PRIMITIVES["Gabor_FE"] = _sig(
    "Gabor_FE", (I, GpType.ORIENTATION, GpType.FREQUENCY), F, Layer.FEATURE_EXTRACTION,
    (None, "theta", "f"),
)
PRIMITIVES["Gau_FE"] = _sig(
    "Gau_FE", (I, GpType.SIGMA), F, Layer.FEATURE_EXTRACTION, (None, "sigma"),
)
PRIMITIVES["GauD_FE"] = _sig(
    "GauD_FE", (I, GpType.SIGMA, GpType.ORDER, GpType.ORDER), F, Layer.FEATURE_EXTRACTION,
    (None, "sigma", "o1", "o2"),
)

for _n in (2, 3, 4):
    PRIMITIVES[f"Comb{_n}"] = _sig(f"Comb{_n}", (F,) * _n, F, Layer.CONCATENATION)

for _family in ("RF", "ERF"):
    PRIMITIVES[f"CC_{_family}"] = _sig(
        f"CC_{_family}", (F, GpType.TREE_COUNT, GpType.TREE_DEPTH), F,
        Layer.CLASSIFICATION_CASCADE, (None, "t", "d"),
    )
    PRIMITIVES[_family] = _sig(
        _family, (F, GpType.TREE_COUNT, GpType.TREE_DEPTH), P,
        Layer.CLASSIFICATION, (None, "t", "d"),
    )
for _family in ("LR", "SVM"):
    PRIMITIVES[f"CC_{_family}"] = _sig(f"CC_{_family}", (F,), F, Layer.CLASSIFICATION_CASCADE)
    PRIMITIVES[_family] = _sig(_family, (F,), P, Layer.CLASSIFICATION)

for _n in (2, 3, 4):
    PRIMITIVES[f"Sum{_n}"] = _sig(f"Sum{_n}", (P,) * _n, P, Layer.SUMMATION)

ROOT_PRIMITIVES = ("Sum2", "Sum3", "Sum4")

# Parameter keyword -> type
PARAM_TYPES: dict[str, GpType] = {
    "t": GpType.TREE_COUNT,
    "d": GpType.TREE_DEPTH,
    "f": GpType.FREQUENCY,
    "theta": GpType.ORIENTATION,
    "o1": GpType.ORDER,
    "o2": GpType.ORDER,
    "sigma": GpType.SIGMA,
}


@dataclass(frozen=True)
class ParamValue:
    """One admissible value of a parameter terminal and its text label."""
    label: str
    value: Union[int, float]


@dataclass(frozen=True)
class TerminalSpec:
    """A terminal kind: an image channel or a parameter with a finite domain."""
    name: str
    gp_type: GpType
    channel: Optional[Channel] = None
    domain: tuple[ParamValue, ...] = ()

    @property
    def is_channel(self) -> bool:
        return self.channel is not None

    def lookup(self, label: str) -> Optional[ParamValue]:
        for candidate in self.domain:
            if candidate.label == label:
                return candidate
        return None


def pi_label(multiple: Fraction) -> str:
    """Render ``multiple * pi`` as e.g. ``3pi/8``."""
    if multiple == 0:
        return "0"
    numerator = "" if multiple.numerator == 1 else str(multiple.numerator)
    if multiple.denominator == 1:
        return f"{numerator}pi"
    return f"{numerator}pi/{multiple.denominator}"


def orientation_domain() -> tuple[ParamValue, ...]:
    return tuple(
        ParamValue(pi_label(Fraction(k, 8)), k * math.pi / 8) for k in range(8)
    )


def frequency_domain(reading: str = "divided") -> tuple[ParamValue, ...]:
    """
    Gabor frequency grid on [pi/8, pi/2].

    The published step "pi/2sqrt2" is read either as pi/(2*sqrt2) ("divided")
    or as (pi/2)*sqrt2 ("multiplied"); grid points past pi/2 clip to pi/2.
    """
    low, high = math.pi / 8, math.pi / 2
    if reading == "divided":
        step, step_label = math.pi / (2 * math.sqrt(2)), "sqrt2*pi/4"
    elif reading == "multiplied":
        step, step_label = math.pi / 2 * math.sqrt(2), "sqrt2*pi/2"
    else:
        raise ConfigError(f"Unknown Gabor frequency reading: {reading}")

    values = [ParamValue("pi/8", low)]
    k = 1
    while low + k * step < high:
        label = f"pi/8+{step_label}" if k == 1 else f"pi/8+{k}*{step_label}"
        values.append(ParamValue(label, low + k * step))
        k += 1
    values.append(ParamValue("pi/2", high))
    return tuple(values)


def _int_domain(start: int, stop: int, step: int) -> tuple[ParamValue, ...]:
    return tuple(ParamValue(str(v), v) for v in range(start, stop + 1, step))


@dataclass
class PrimitiveRegistry:
    """
    Functions and terminals available to trees for one dataset.

    The function set is fixed; channel terminals depend on the channel count and
    parameter domains on the configured Gabor frequency reading.
    """
    num_channels: int
    num_classes: int
    primitives: dict[str, PrimitiveSignature]
    channel_terminals: tuple[TerminalSpec, ...]
    param_terminals: dict[str, TerminalSpec]
    min_height: dict[GpType, int] = field(default_factory=dict)
    min_size: dict[GpType, int] = field(default_factory=dict)

    def __post_init__(self):
        self._by_return: dict[GpType, list[PrimitiveSignature]] = {}
        for sig in self.primitives.values():
            self._by_return.setdefault(sig.return_type, []).append(sig)
        self._compute_minimums()

    def _compute_minimums(self) -> None:
        """Shortest completion height and size for every type (fixed point)."""
        height: dict[GpType, float] = {t: math.inf for t in GpType}
        size: dict[GpType, float] = {t: math.inf for t in GpType}
        for t in GpType:
            if self.terminals_for(t):
                height[t], size[t] = 0, 1
        changed = True
        while changed:
            changed = False
            for sig in self.primitives.values():
                h = 1 + max(height[c] for c in sig.child_types)
                s = 1 + sum(size[c] for c in sig.child_types)
                r = sig.return_type
                if (h, s) < (height[r], size[r]):
                    height[r], size[r] = h, s
                    changed = True
        self.min_height = {t: int(h) for t, h in height.items() if h != math.inf}
        self.min_size = {t: int(s) for t, s in size.items() if s != math.inf}

    def signature_height(self, sig: PrimitiveSignature) -> int:
        """Smallest height of a subtree rooted at this primitive."""
        return 1 + max(self.min_height[c] for c in sig.child_types)

    def signature_size(self, sig: PrimitiveSignature) -> int:
        return 1 + sum(self.min_size[c] for c in sig.child_types)

    def primitive(self, name: str) -> Optional[PrimitiveSignature]:
        return self.primitives.get(name)

    def functions_for(self, gp_type: GpType) -> list[PrimitiveSignature]:
        return list(self._by_return.get(gp_type, []))

    def root_functions(self) -> list[PrimitiveSignature]:
        return [self.primitives[name] for name in ROOT_PRIMITIVES]

    def terminals_for(self, gp_type: GpType) -> list[TerminalSpec]:
        if gp_type is GpType.IMAGE:
            return list(self.channel_terminals)
        return [spec for spec in self.param_terminals.values() if spec.gp_type is gp_type][:1]

    def param(self, key: str) -> Optional[TerminalSpec]:
        return self.param_terminals.get(key)

    def channel(self, name: str) -> Optional[TerminalSpec]:
        for spec in self.channel_terminals:
            if spec.name == name:
                return spec
        return None


def register_primitives(
    num_channels: int,
    num_classes: int,
    frequency_reading: str = "divided",
) -> PrimitiveRegistry:
    """
    Build the registry for a dataset.

    Args:
        num_channels: 1 for gray-scale data, 3 for colour data
        num_classes: class count C (at least 2)
        frequency_reading: how the Gabor frequency step is read

    Raises:
        ConfigError: unsupported channel count or too few classes
    """
    if num_channels not in (1, 3):
        raise ConfigError(f"Unsupported channel count {num_channels}; expected 1 or 3")
    if num_classes < 2:
        raise ConfigError(f"At least 2 classes are required, got {num_classes}")

    if num_channels == 1:
        channels = (Channel.GRAY,)
    else:
        channels = (Channel.RED, Channel.GREEN, Channel.BLUE, Channel.GRAY)
    channel_terminals = tuple(
        TerminalSpec(name=c.value, gp_type=GpType.IMAGE, channel=c) for c in channels
    )

    orders = _int_domain(0, 2, 1)
    param_terminals = {
        "t": TerminalSpec("t", GpType.TREE_COUNT, domain=_int_domain(50, 1000, 50)),
        "d": TerminalSpec("d", GpType.TREE_DEPTH, domain=_int_domain(10, 100, 10)),
        "f": TerminalSpec("f", GpType.FREQUENCY, domain=frequency_domain(frequency_reading)),
        "theta": TerminalSpec("theta", GpType.ORIENTATION, domain=orientation_domain()),
        "o1": TerminalSpec("o1", GpType.ORDER, domain=orders),
        "o2": TerminalSpec("o2", GpType.ORDER, domain=orders),
        "sigma": TerminalSpec("sigma", GpType.SIGMA, domain=_int_domain(1, 3, 1)),
    }

    return PrimitiveRegistry(
        num_channels=num_channels,
        num_classes=num_classes,
        primitives=dict(PRIMITIVES),
        channel_terminals=channel_terminals,
        param_terminals=param_terminals,
    )
