"""Genotype rendering: indented text, DOT graphs and node-link JSON."""

from dataclasses import dataclass, field
from typing import Optional

from src.models import GpType, Layer
from src.gp.primitives import PRIMITIVES
from src.gp.tree import Function, GenotypeTree, Node, Path, Terminal, node_type
from src.errors import format_path


@dataclass
class TreeNode:
    """A node of the rendered tree graph."""
    id: str
    label: str
    gp_type: GpType
    layer: Layer
    path: Path

    children: list[str] = field(default_factory=list)


@dataclass
class TreeGraph:
    """Flat node list of one genotype, in pre-order."""
    nodes: list[TreeNode] = field(default_factory=list)
    size: int = 0
    depth: int = 0


def _layer_of(node: Node) -> Layer:
    if isinstance(node, Terminal):
        return Layer.INPUT if node.is_channel else Layer.PARAMETER
    return PRIMITIVES[node.name].layer


def _label_of(node: Node, parent: Optional[Function], position: int) -> str:
    if isinstance(node, Function):
        return node.name
    if parent is not None:
        key = PRIMITIVES[parent.name].key_for(position)
        if key is not None:
            return f"{key}={node.label}"
    return node.label


class TreeGraphGenerator:
    """
    Builds a graph view of a genotype.

    Output formats: indented text with per-node type and layer, Graphviz DOT,
    and a node-link dict (D3.js compatible).
    """

    def generate(self, tree: GenotypeTree) -> TreeGraph:
        graph = TreeGraph(size=tree.size, depth=tree.depth)
        self._visit(tree.root, None, 0, (), graph)
        return graph

    def _visit(
        self,
        node: Node,
        parent: Optional[Function],
        position: int,
        path: Path,
        graph: TreeGraph,
    ) -> str:
        node_id = f"n{len(graph.nodes)}"
        entry = TreeNode(
            id=node_id,
            label=_label_of(node, parent, position),
            gp_type=node_type(node),
            layer=_layer_of(node),
            path=path,
        )
        graph.nodes.append(entry)
        if isinstance(node, Function):
            for i, child in enumerate(node.children):
                entry.children.append(self._visit(child, node, i, path + (i,), graph))
        return node_id

    def to_text(self, graph: TreeGraph) -> str:
        lines = [f"size={graph.size} depth={graph.depth}"]
        for node in graph.nodes:
            indent = "  " * len(node.path)
            lines.append(f"{indent}{node.label}  [{node.gp_type.value}, {node.layer.value}]")
        return "\n".join(lines)

    def to_dot(self, graph: TreeGraph, name: str = "genotype") -> str:
        lines = [f"digraph {name} {{", "  node [shape=box, fontname=Helvetica];"]
        for node in graph.nodes:
            label = f"{node.label}\\n{node.gp_type.value}".replace('"', '\\"')
            shape = "ellipse" if node.layer in (Layer.INPUT, Layer.PARAMETER) else "box"
            lines.append(f'  {node.id} [label="{label}", shape={shape}];')
        for node in graph.nodes:
            for child in node.children:
                lines.append(f"  {node.id} -> {child};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self, graph: TreeGraph) -> dict:
        return {
            "size": graph.size,
            "depth": graph.depth,
            "nodes": [
                {
                    "id": n.id,
                    "label": n.label,
                    "type": n.gp_type.value,
                    "layer": n.layer.value,
                    "path": format_path(n.path),
                }
                for n in graph.nodes
            ],
            "links": [
                {"source": n.id, "target": child}
                for n in graph.nodes
                for child in n.children
            ],
        }
