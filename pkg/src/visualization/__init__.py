"""Tree and image-plane rendering."""

from src.visualization.planes import write_pgm_p2
from src.visualization.tree_render import TreeGraph, TreeGraphGenerator, TreeNode

__all__ = ["write_pgm_p2", "TreeGraph", "TreeGraphGenerator", "TreeNode"]
