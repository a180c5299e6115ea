/**
 * Byte-exact writers for the pipeline's annotation file formats:
 * LF line endings, one header row, dot-decimal floats in shortest
 * round-trip form with integer values keeping a trailing ".0" (matching
 * the pipeline's own serializer, so files are directly diffable).
 */

import { SessionData, isComplete } from "./types.js";

/** Shortest round-trip decimal; integer-valued floats keep one decimal. */
export function formatCoord(x: number): string {
    if (!Number.isFinite(x)) throw new Error(`non-finite coordinate: ${x}`);
    if (Number.isInteger(x) && Math.abs(x) < 1e15) {
        return Object.is(x, -0) ? "-0.0" : `${x}.0`;
    }
    return String(x);
}

export function correspondencesCsv(session: SessionData): string {
    const complete = session.pairs.filter(isComplete);
    if (complete.length === 0) {
        throw new Error("nothing to export: no complete point pairs");
    }
    const rows = ["id,x_a,y_a,x_b,y_b"];
    for (const pair of complete) {
        const a = pair.a!;
        const b = pair.b!;
        rows.push(
            `${pair.id},${formatCoord(a.x)},${formatCoord(a.y)},${formatCoord(b.x)},${formatCoord(b.y)}`
        );
    }
    return rows.join("\n") + "\n";
}

export function linesCsv(session: SessionData): string {
    if (session.lines.length === 0) {
        throw new Error("nothing to export: no line segments");
    }
    const rows = ["plane_id,view,x0,y0,x1,y1"];
    for (const l of session.lines) {
        rows.push(
            `${l.planeId},${l.view},${formatCoord(l.x0)},${formatCoord(l.y0)},${formatCoord(l.x1)},${formatCoord(l.y1)}`
        );
    }
    return rows.join("\n") + "\n";
}
