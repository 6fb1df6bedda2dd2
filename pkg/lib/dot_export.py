"""Graphviz DOT and text renderings (Jinja2 templates in templates/).

Context graphs render one digraph per context, intervention nodes as boxes.
Trees render every node coloured by stage; singleton stages stay white and
stored stages take palette colours in stage order, so output is byte-stable.
"""

import logging
from pathlib import Path

from jinja2 import Environment, FileSystemLoader, StrictUndefined

from .config import PROJECT_ROOT
from .csi import ContextGraphSet, context_graphs
from .file_lock import write_text
from .helpers import format_node, node_key
from .interventions import ContextIDagSet, InterventionalCStree
from .model import CStree, enumerate_prefixes, stage_of

log = logging.getLogger(__name__)

TEMPLATES_DIR = PROJECT_ROOT / "templates"

PALETTE = [
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33", "#a65628", "#f781bf",
    "#66c2a5", "#fc8d62", "#8da0cb", "#e78ac3", "#a6d854", "#ffd92f", "#e5c494", "#b3b3b3",
]
SINGLETON_COLOR = "#ffffff"

_env = Environment(
    loader=FileSystemLoader(TEMPLATES_DIR),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def _render(template: str, **context) -> str:
    return _env.get_template(template).render(**context)


def _panel(name: str, label: str, dag, variables) -> dict:
    return {
        "name": name,
        "label": label,
        "nodes": [{"id": format_node(n, variables), "label": format_node(n, variables), "box": not isinstance(n, int)}
                  for n in sorted(dag.nodes, key=node_key)],
        "edges": [(format_node(u, variables), format_node(v, variables)) for u, v in dag.sorted_edges()],
    }


def context_graphs_dot(graphs: ContextGraphSet | ContextIDagSet) -> str:
    variables = graphs.variables
    panels = []
    for i, context in enumerate(graphs.contexts):
        entry = graphs.graphs[context]
        dag = entry.dag if isinstance(graphs, ContextIDagSet) else entry
        panels.append(_panel(f"G{i}", f"[{context.format(variables)}]", dag, variables))
    return _render("context_graphs.dot.j2", panels=panels)


def _node_id(prefix) -> str:
    return "r" if not prefix else "n" + "_".join(str(x) for x in prefix)


def tree_dot(tree: CStree, name: str = "cstree") -> str:
    colors = {}
    for stage in tree.stages:
        colors[stage] = PALETTE[len(colors) % len(PALETTE)]
    nodes = []
    edges = []
    for depth in range(tree.p + 1):
        for prefix in enumerate_prefixes(tree, depth):
            if depth < tree.p:
                stage = stage_of(tree, prefix)
                color = colors.get(stage, SINGLETON_COLOR)
                tooltip = stage.format(tree.variables)
            else:
                color, tooltip = SINGLETON_COLOR, "leaf"
            nodes.append({"id": _node_id(prefix), "color": color, "tooltip": tooltip})
            if depth:
                v = tree.variables[tree.level_variable(depth)]
                edges.append({"parent": _node_id(prefix[:-1]), "child": _node_id(prefix),
                              "label": f"{v.name}={v.label(prefix[-1])}"})
    return _render("tree.dot.j2", name=name, nodes=nodes, edges=edges)


def contexts_report(tree: CStree) -> str:
    """Plain-text summary of the minimal contexts and their graphs."""
    graphs = context_graphs(tree)
    variables = tree.variables
    contexts = [{"context": c.format(variables),
                 "edges": [f"{format_node(u, variables)}->{format_node(v, variables)}"
                           for u, v in graphs.graphs[c].sorted_edges()]}
                for c in graphs.contexts]
    return _render("report.txt.j2", variables=[v.name for v in variables],
                   order=[variables[v].name for v in tree.order], stages=tree.total_stages(),
                   stored=len(tree.stages), contexts=contexts)


def export_dot(obj, path: Path):
    """Write a tree, interventional tree or graph collection as DOT."""
    if isinstance(obj, InterventionalCStree):
        text = context_graphs_dot(obj.idags)
    elif isinstance(obj, CStree):
        text = context_graphs_dot(context_graphs(obj))
    elif isinstance(obj, (ContextGraphSet, ContextIDagSet)):
        text = context_graphs_dot(obj)
    else:
        raise TypeError(f"cannot export {type(obj).__name__} as DOT")
    write_text(Path(path), text)
    log.info(f"Wrote DOT to {path}")
