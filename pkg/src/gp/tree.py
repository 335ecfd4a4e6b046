"""Typed program trees: nodes, canonical text form, parsing and type checking."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union
import re

from src.models import Channel, FitnessReport, GpType
from src.errors import TreeParseError, TypeViolation
from src.gp.primitives import PRIMITIVES, PARAM_TYPES, ROOT_PRIMITIVES, PrimitiveRegistry


@dataclass(frozen=True)
class Terminal:
    """Leaf node: an image channel or a parameter value."""
    gp_type: GpType
    label: str
    value: Union[Channel, int, float]

    @property
    def is_channel(self) -> bool:
        return self.gp_type is GpType.IMAGE


@dataclass(frozen=True)
class Function:
    """Internal node: a named primitive applied to typed children."""
    name: str
    children: tuple["Node", ...]


Node = Union[Function, Terminal]
Path = tuple[int, ...]


def node_type(node: Node) -> GpType:
    if isinstance(node, Terminal):
        return node.gp_type
    return PRIMITIVES[node.name].return_type


def node_depth(node: Node) -> int:
    """Edges on the longest path from ``node`` down to a leaf."""
    if isinstance(node, Terminal):
        return 0
    return 1 + max(node_depth(child) for child in node.children)


def node_size(node: Node) -> int:
    if isinstance(node, Terminal):
        return 1
    return 1 + sum(node_size(child) for child in node.children)


def render(node: Node) -> str:
    """Canonical s-expression; parameter children are written as ``key=label``."""
    if isinstance(node, Terminal):
        return node.label
    sig = PRIMITIVES[node.name]
    parts = [node.name]
    for position, child in enumerate(node.children):
        key = sig.key_for(position)
        if key is not None and isinstance(child, Terminal):
            parts.append(f"{key}={child.label}")
        else:
            parts.append(render(child))
    return f"({' '.join(parts)})"


def iter_nodes(node: Node, path: Path = ()) -> Iterator[tuple[Path, Node]]:
    """Pre-order walk yielding (path, node)."""
    yield path, node
    if isinstance(node, Function):
        for i, child in enumerate(node.children):
            yield from iter_nodes(child, path + (i,))


def node_at(node: Node, path: Path) -> Node:
    for i in path:
        if not isinstance(node, Function):
            raise IndexError(f"path {path} runs past a terminal")
        node = node.children[i]
    return node


def replace_at(node: Node, path: Path, replacement: Node) -> Node:
    """Return a copy of ``node`` with the subtree at ``path`` swapped out."""
    if not path:
        return replacement
    if not isinstance(node, Function):
        raise IndexError(f"path {path} runs past a terminal")
    head, rest = path[0], path[1:]
    children = list(node.children)
    children[head] = replace_at(children[head], rest, replacement)
    return Function(node.name, tuple(children))


@dataclass(frozen=True)
class GenotypeTree:
    """An untrained program tree. Immutable; variation builds new trees."""
    root: Function

    @cached_property
    def depth(self) -> int:
        return node_depth(self.root)

    @cached_property
    def size(self) -> int:
        return node_size(self.root)

    @cached_property
    def text(self) -> str:
        return render(self.root)

    def __str__(self) -> str:
        return self.text

    def nodes(self) -> Iterator[tuple[Path, Node]]:
        return iter_nodes(self.root)

    def non_root_paths(self) -> list[Path]:
        return [path for path, _ in self.nodes() if path]

    def subtree(self, path: Path) -> Node:
        return node_at(self.root, path)

    def depth_of(self, path: Path) -> int:
        return len(path)

    def replace(self, path: Path, replacement: Node) -> "GenotypeTree":
        new_root = replace_at(self.root, path, replacement)
        if not isinstance(new_root, Function):
            raise TypeViolation("root must be a function node", ())
        return GenotypeTree(new_root)


@dataclass
class Individual:
    """Population member: a genotype and (once evaluated) its fitness."""
    genotype: GenotypeTree
    fitness: Optional[float] = None
    report: Optional[FitnessReport] = field(default=None, repr=False)

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    @property
    def size(self) -> int:
        return self.genotype.size


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None or match.end() == pos:
            if text[pos:].strip() == "":
                break
            raise TreeParseError(f"Unexpected character {text[pos]!r}", pos)
        token = match.group(1) or match.group(2) or match.group(3)
        if token is None:
            break
        tokens.append((token, match.start(match.lastindex)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str, registry: PrimitiveRegistry):
        self.text = text
        self.registry = registry
        self.tokens = _tokenize(text)
        self.index = 0
        self.positions: dict[Path, int] = {}

    def _peek(self) -> tuple[str, int]:
        if self.index >= len(self.tokens):
            raise TreeParseError("Unexpected end of input", len(self.text))
        return self.tokens[self.index]

    def _next(self) -> tuple[str, int]:
        token = self._peek()
        self.index += 1
        return token

    def parse(self) -> Function:
        token, pos = self._peek()
        if token != "(":
            raise TreeParseError("Tree must start with '('", pos)
        root = self._function(())
        if self.index != len(self.tokens):
            raise TreeParseError("Trailing input after tree", self.tokens[self.index][1])
        return root

    def _function(self, path: Path) -> Function:
        _, self.positions[path] = self._next()
        name, pos = self._next()
        sig = self.registry.primitive(name)
        if sig is None:
            raise TreeParseError(f"Unknown primitive {name!r}", pos)

        children: list[Node] = []
        while True:
            token, tpos = self._peek()
            if token == ")":
                self._next()
                break
            if len(children) >= sig.arity:
                raise TreeParseError(f"Too many arguments for {name}", tpos)
            expected_key = sig.key_for(len(children))
            child_path = path + (len(children),)
            if token == "(":
                children.append(self._function(child_path))
                continue
            self.positions[child_path] = tpos
            if expected_key is not None:
                children.append(self._param(expected_key))
            else:
                children.append(self._channel())

        if len(children) != sig.arity:
            raise TreeParseError(
                f"{name} takes {sig.arity} arguments, got {len(children)}", pos
            )
        return Function(name, tuple(children))

    def _channel(self) -> Terminal:
        token, pos = self._next()
        spec = self.registry.channel(token)
        if spec is None:
            raise TreeParseError(f"Unknown or unavailable channel {token!r}", pos)
        return Terminal(GpType.IMAGE, spec.name, spec.channel)

    def _param(self, expected_key: str) -> Terminal:
        token, pos = self._next()
        key, sep, label = token.partition("=")
        if not sep:
            raise TreeParseError(f"Expected parameter {expected_key}=<value>, got {token!r}", pos)
        if key != expected_key:
            raise TreeParseError(f"Expected parameter {expected_key!r}, got {key!r}", pos)
        spec = self.registry.param(key)
        value = spec.lookup(label) if spec is not None else None
        if value is None:
            raise TreeParseError(f"Value {label!r} is outside the domain of {key}", pos)
        return Terminal(PARAM_TYPES[key], value.label, value.value)


def parse_tree(text: str, registry: PrimitiveRegistry, check: bool = True) -> GenotypeTree:
    """
    Parse the canonical s-expression form back into a tree.

    With ``check`` the result must also type-check under ``registry`` with a
    summation root.

    Raises:
        TreeParseError: malformed or ill-typed text, with the offending character
            offset (and node path for type errors)
    """
    parser = _Parser(text.strip(), registry)
    tree = GenotypeTree(parser.parse())
    if check:
        try:
            check_tree(tree, registry)
        except TypeViolation as e:
            raise TreeParseError(str(e), parser.positions.get(e.path, 0), e.path) from e
    return tree


# ---------------------------------------------------------------------------
# Type checking
# ---------------------------------------------------------------------------

def check_tree(tree: GenotypeTree, registry: PrimitiveRegistry, max_depth: Optional[int] = None) -> None:
    """
    Verify a tree against the registry.

    Raises:
        TypeViolation: wrong root, arity, child type, unknown symbol, domain or depth
    """
    if tree.root.name not in ROOT_PRIMITIVES:
        raise TypeViolation(f"root must be one of {ROOT_PRIMITIVES}, got {tree.root.name}", ())
    _check_node(tree.root, registry, ())
    if max_depth is not None and tree.depth > max_depth:
        raise TypeViolation(f"depth {tree.depth} exceeds max_depth {max_depth}", ())


def _check_node(node: Node, registry: PrimitiveRegistry, path: Path) -> None:
    if isinstance(node, Terminal):
        if node.is_channel:
            if registry.channel(node.label) is None:
                raise TypeViolation(f"channel {node.label} not available", path)
        return

    sig = registry.primitive(node.name)
    if sig is None:
        raise TypeViolation(f"unknown primitive {node.name}", path)
    if len(node.children) != sig.arity:
        raise TypeViolation(f"{node.name} expects {sig.arity} children", path)

    for i, (child, expected) in enumerate(zip(node.children, sig.child_types)):
        child_path = path + (i,)
        actual = node_type(child)
        if actual is not expected:
            raise TypeViolation(
                f"{node.name} argument {i} expects {expected.value}, got {actual.value}",
                child_path,
            )
        key = sig.key_for(i)
        if key is not None:
            if not isinstance(child, Terminal):
                raise TypeViolation(f"parameter {key} must be a terminal", child_path)
            spec = registry.param(key)
            if spec is None or spec.lookup(child.label) is None:
                raise TypeViolation(f"{key}={child.label} outside its domain", child_path)
        _check_node(child, registry, child_path)


def is_valid(tree: GenotypeTree, registry: PrimitiveRegistry, max_depth: Optional[int] = None) -> bool:
    try:
        check_tree(tree, registry, max_depth)
    except TypeViolation:
        return False
    return True
