/** Deterministic layout: switches on an inner ring, each endpoint pushed
 * outward at the angle of the switch it attaches to. */

import { TopologyDocument } from "./api.js";

export interface Point {
  x: number;
  y: number;
}

export function layout(doc: TopologyDocument, width: number, height: number): Map<string, Point> {
  const positions = new Map<string, Point>();
  const cx = width / 2;
  const cy = height / 2;
  const inner = Math.min(width, height) * 0.3;
  const outer = Math.min(width, height) * 0.45;

  const switches = doc.nodes.filter((n) => n.kind === "switch");
  switches.forEach((node, i) => {
    const angle = (2 * Math.PI * i) / switches.length - Math.PI / 2;
    positions.set(node.id, { x: cx + inner * Math.cos(angle), y: cy + inner * Math.sin(angle) });
  });

  const attachments = new Map<string, string>(); // city -> switch
  for (const edge of doc.edges) {
    if (edge.dst_port === null) attachments.set(edge.target, edge.source);
  }
  const endpoints = doc.nodes.filter((n) => n.kind === "endpoint");
  endpoints.forEach((node, i) => {
    const anchor = positions.get(attachments.get(node.id) ?? "");
    if (anchor === undefined) {
      const angle = (2 * Math.PI * i) / endpoints.length;
      positions.set(node.id, { x: cx + outer * Math.cos(angle), y: cy + outer * Math.sin(angle) });
      return;
    }
    const dx = anchor.x - cx;
    const dy = anchor.y - cy;
    const norm = Math.hypot(dx, dy) || 1;
    positions.set(node.id, {
      x: cx + (dx / norm) * outer,
      y: cy + (dy / norm) * outer,
    });
  });
  return positions;
}
