/** Pure scene construction (testable) plus a thin SVG applier. */

import { PathEdge, TopologyDocument, TopologyEdge } from "./api.js";
import { layout, Point } from "./layout.js";

export interface SceneNode {
  id: string;
  label: string;
  kind: "switch" | "endpoint";
  x: number;
  y: number;
}

export interface SceneEdge {
  key: string;
  x1: number;
  y1: number;
  x2: number;
  y2: number;
  highlighted: boolean;
  tooltip: string;
}

export interface Scene {
  nodes: SceneNode[];
  edges: SceneEdge[];
}

/** Canonical key of an undirected edge with its port pair. */
export function edgeKey(aNode: string, aPort: number | null, bNode: string, bPort: number | null): string {
  const ends = [`${aNode}:${aPort ?? "-"}`, `${bNode}:${bPort ?? "-"}`].sort();
  return ends.join("|");
}

function topologyEdgeKey(edge: TopologyEdge): string {
  return edgeKey(edge.source, edge.src_port, edge.target, edge.dst_port);
}

export function pathEdgeKeys(edges: PathEdge[]): Set<string> {
  return new Set(edges.map((e) => edgeKey(e.source, e.src_port, e.target, e.dst_port)));
}

function tooltip(edge: TopologyEdge): string {
  if (edge.capacity_mbps === null) return `${edge.source} - ${edge.target}`;
  return (
    `${edge.source}:${edge.src_port} - ${edge.target}:${edge.dst_port}  ` +
    `latency ${edge.latency_ms} ms, capacity ${edge.capacity_mbps} mbps, ` +
    `available ${edge.available_mbps} mbps`
  );
}

export function buildScene(
  doc: TopologyDocument,
  highlight: PathEdge[],
  width: number,
  height: number,
): Scene {
  const positions = layout(doc, width, height);
  const highlighted = pathEdgeKeys(highlight);
  const nodes: SceneNode[] = doc.nodes.map((node) => {
    const at = positions.get(node.id) as Point;
    return { id: node.id, label: node.label, kind: node.kind, x: at.x, y: at.y };
  });
  const edges: SceneEdge[] = doc.edges.map((edge) => {
    const a = positions.get(edge.source) as Point;
    const b = positions.get(edge.target) as Point;
    return {
      key: topologyEdgeKey(edge),
      x1: a.x,
      y1: a.y,
      x2: b.x,
      y2: b.y,
      highlighted: highlighted.has(topologyEdgeKey(edge)),
      tooltip: tooltip(edge),
    };
  });
  return { nodes, edges };
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderScene(svg: SVGSVGElement, scene: Scene): void {
  while (svg.firstChild) svg.removeChild(svg.firstChild);
  for (const edge of scene.edges) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(edge.x1));
    line.setAttribute("y1", String(edge.y1));
    line.setAttribute("x2", String(edge.x2));
    line.setAttribute("y2", String(edge.y2));
    line.setAttribute("class", edge.highlighted ? "edge highlighted" : "edge");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = edge.tooltip;
    line.appendChild(title);
    svg.appendChild(line);
  }
  for (const node of scene.nodes) {
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", `node ${node.kind}`);
    const shape = document.createElementNS(SVG_NS, node.kind === "switch" ? "rect" : "circle");
    if (node.kind === "switch") {
      shape.setAttribute("x", String(node.x - 18));
      shape.setAttribute("y", String(node.y - 12));
      shape.setAttribute("width", "36");
      shape.setAttribute("height", "24");
      shape.setAttribute("rx", "4");
    } else {
      shape.setAttribute("cx", String(node.x));
      shape.setAttribute("cy", String(node.y));
      shape.setAttribute("r", "14");
    }
    const text = document.createElementNS(SVG_NS, "text");
    text.setAttribute("x", String(node.x));
    text.setAttribute("y", String(node.y + 30));
    text.textContent = node.label;
    group.appendChild(shape);
    group.appendChild(text);
    svg.appendChild(group);
  }
}
