/**
 * Session save/load. JSON keeps doubles at full precision, so annotation
 * coordinates and view transforms round-trip losslessly.
 */

import { SessionData, emptySession } from "./types.js";

const FORMAT = "semsurf-annotator-session";
const VERSION = 1;

export function serializeSession(data: SessionData): string {
    return JSON.stringify({ format: FORMAT, version: VERSION, session: data });
}

export function deserializeSession(text: string): SessionData {
    let doc: unknown;
    try {
        doc = JSON.parse(text);
    } catch (exc) {
        throw new Error(`not a session file: ${(exc as Error).message}`);
    }
    const obj = doc as { format?: string; version?: number; session?: SessionData };
    if (obj.format !== FORMAT) {
        throw new Error("not a session file: wrong format marker");
    }
    if (obj.version !== VERSION) {
        throw new Error(`unsupported session version ${obj.version}`);
    }
    const base = emptySession();
    const s = obj.session;
    if (!s || typeof s !== "object") throw new Error("not a session file: missing body");
    return {
        ...base,
        ...s,
        pairs: (s.pairs ?? []).map((p) => ({ id: p.id, a: p.a ?? null, b: p.b ?? null })),
        lines: (s.lines ?? []).slice(),
    };
}
