/**
 * Annotation session model: point pairs across the two views and
 * parallel-line segments per orthogonal plane. Pure data operations,
 * no DOM; every mutation reports whether it was accepted so the UI can
 * give feedback without the model knowing about rendering.
 */

import {
    ImagePoint,
    LineAnnotation,
    PlaneId,
    PointPair,
    SessionData,
    ViewId,
    emptySession,
    isComplete,
} from "./types.js";

export const MIN_DRAG_PX = 5;

export interface OpResult {
    ok: boolean;
    reason?: string;
}

export class AnnotationSession {
    data: SessionData;

    constructor(data?: SessionData) {
        this.data = data ?? emptySession();
    }

    private imageSize(view: ViewId): { width: number; height: number } | null {
        const ref = view === "A" ? this.data.imageA : this.data.imageB;
        return ref ? { width: ref.width, height: ref.height } : null;
    }

    private inBounds(view: ViewId, p: ImagePoint): boolean {
        const size = this.imageSize(view);
        if (!size) return false;
        return p.x >= 0 && p.y >= 0 && p.x <= size.width - 1 && p.y <= size.height - 1;
    }

    /** The pair currently waiting for its other view's click, if any. */
    pendingPair(): PointPair | null {
        for (const pair of this.data.pairs) {
            if (!isComplete(pair)) return pair;
        }
        return null;
    }

    completePairs(): PointPair[] {
        return this.data.pairs.filter(isComplete);
    }

    private freshId(): string {
        let n = this.data.nextPairNumber;
        const used = new Set(this.data.pairs.map((p) => p.id));
        let id = `p${String(n).padStart(3, "0")}`;
        while (used.has(id)) {
            n += 1;
            id = `p${String(n).padStart(3, "0")}`;
        }
        this.data.nextPairNumber = n + 1;
        return id;
    }

    /**
     * Register a click in one view. Starts a new pair or completes the
     * pending one; a second click in the view that already has the pending
     * half replaces that half (lets the user correct a misclick).
     */
    clickPoint(view: ViewId, p: ImagePoint): OpResult {
        if (!this.imageSize(view)) return { ok: false, reason: `no image loaded for view ${view}` };
        if (!this.inBounds(view, p)) return { ok: false, reason: "click outside image" };
        const pending = this.pendingPair();
        if (pending) {
            if (view === "A") pending.a = { ...p };
            else pending.b = { ...p };
            return { ok: true };
        }
        const pair: PointPair = { id: this.freshId(), a: null, b: null };
        if (view === "A") pair.a = { ...p };
        else pair.b = { ...p };
        this.data.pairs.push(pair);
        return { ok: true };
    }

    /** Add a fully specified pair (both views) in one call. */
    addPointPair(a: ImagePoint, b: ImagePoint): OpResult {
        if (!this.inBounds("A", a) || !this.inBounds("B", b)) {
            return { ok: false, reason: "click outside image" };
        }
        this.data.pairs.push({ id: this.freshId(), a: { ...a }, b: { ...b } });
        return { ok: true };
    }

    renamePair(oldId: string, newId: string): OpResult {
        const trimmed = newId.trim();
        if (!trimmed) return { ok: false, reason: "empty id" };
        if (trimmed.includes(",") || /\s/.test(trimmed)) {
            return { ok: false, reason: "id must not contain commas or whitespace" };
        }
        const pair = this.data.pairs.find((p) => p.id === oldId);
        if (!pair) return { ok: false, reason: `no pair ${oldId}` };
        if (trimmed !== oldId && this.data.pairs.some((p) => p.id === trimmed)) {
            return { ok: false, reason: `id ${trimmed} already in use` };
        }
        pair.id = trimmed;
        return { ok: true };
    }

    removePair(id: string): OpResult {
        const i = this.data.pairs.findIndex((p) => p.id === id);
        if (i < 0) return { ok: false, reason: `no pair ${id}` };
        this.data.pairs.splice(i, 1);
        return { ok: true };
    }

    addLineSegment(view: ViewId, planeId: PlaneId, from: ImagePoint, to: ImagePoint): OpResult {
        if (planeId !== 0 && planeId !== 1 && planeId !== 2) {
            return { ok: false, reason: "plane must be 0, 1 or 2" };
        }
        if (!this.imageSize(view)) return { ok: false, reason: `no image loaded for view ${view}` };
        const length = Math.hypot(to.x - from.x, to.y - from.y);
        if (length <= MIN_DRAG_PX) {
            return { ok: false, reason: `drag too short (${length.toFixed(1)} px, need > ${MIN_DRAG_PX})` };
        }
        this.data.lines.push({
            planeId,
            view,
            x0: from.x,
            y0: from.y,
            x1: to.x,
            y1: to.y,
        });
        return { ok: true };
    }

    removeLine(index: number): OpResult {
        if (index < 0 || index >= this.data.lines.length) {
            return { ok: false, reason: "no such line" };
        }
        this.data.lines.splice(index, 1);
        return { ok: true };
    }

    linesFor(view: ViewId): LineAnnotation[] {
        return this.data.lines.filter((l) => l.view === view);
    }
}
