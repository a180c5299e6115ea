import { describe, expect, it } from "vitest";

import { AnnotationSession, MIN_DRAG_PX } from "../src/session.js";
import { ImageRef, isComplete } from "../src/types.js";

const IMAGE: ImageRef = { name: "v.png", width: 800, height: 600, dataUrl: "data:," };

function loaded(): AnnotationSession {
    const s = new AnnotationSession();
    s.data.imageA = { ...IMAGE };
    s.data.imageB = { ...IMAGE };
    return s;
}

describe("point pairs", () => {
    it("auto-increments ids p001, p002, ...", () => {
        const s = loaded();
        s.addPointPair({ x: 1.5, y: 2 }, { x: 3, y: 4 });
        s.addPointPair({ x: 5, y: 6 }, { x: 7, y: 8 });
        expect(s.data.pairs.map((p) => p.id)).toEqual(["p001", "p002"]);
    });

    it("click A then click B completes one pair", () => {
        const s = loaded();
        expect(s.clickPoint("A", { x: 10.25, y: 20.5 }).ok).toBe(true);
        expect(s.pendingPair()?.id).toBe("p001");
        expect(s.clickPoint("B", { x: 30, y: 40 }).ok).toBe(true);
        expect(s.pendingPair()).toBeNull();
        const pair = s.data.pairs[0]!;
        expect(isComplete(pair)).toBe(true);
        expect(pair.a).toEqual({ x: 10.25, y: 20.5 });
    });

    it("second click in the same view replaces the pending half", () => {
        const s = loaded();
        s.clickPoint("A", { x: 10, y: 10 });
        s.clickPoint("A", { x: 12, y: 14 });
        expect(s.data.pairs).toHaveLength(1);
        expect(s.data.pairs[0]!.a).toEqual({ x: 12, y: 14 });
        expect(s.data.pairs[0]!.b).toBeNull();
    });

    it("ignores clicks outside the image with a reason", () => {
        const s = loaded();
        const result = s.clickPoint("A", { x: -3, y: 10 });
        expect(result.ok).toBe(false);
        expect(result.reason).toMatch(/outside/);
        expect(s.data.pairs).toHaveLength(0);
        expect(s.clickPoint("B", { x: 805, y: 10 }).ok).toBe(false);
    });

    it("requires an image before clicking", () => {
        const s = new AnnotationSession();
        expect(s.clickPoint("A", { x: 1, y: 1 }).ok).toBe(false);
    });

    it("rename enforces uniqueness and csv-safe ids", () => {
        const s = loaded();
        s.addPointPair({ x: 1, y: 2 }, { x: 3, y: 4 });
        s.addPointPair({ x: 5, y: 6 }, { x: 7, y: 8 });
        expect(s.renamePair("p001", "crack_tip").ok).toBe(true);
        expect(s.data.pairs[0]!.id).toBe("crack_tip");
        expect(s.renamePair("p002", "crack_tip").ok).toBe(false);
        expect(s.renamePair("p002", "bad id").ok).toBe(false);
        expect(s.renamePair("p002", "a,b").ok).toBe(false);
    });

    it("fresh ids skip user-taken names", () => {
        const s = loaded();
        s.addPointPair({ x: 1, y: 2 }, { x: 3, y: 4 });
        s.renamePair("p001", "p002");
        s.addPointPair({ x: 5, y: 6 }, { x: 7, y: 8 });
        expect(s.data.pairs[1]!.id).toBe("p003");
    });

    it("removePair deletes by id", () => {
        const s = loaded();
        s.addPointPair({ x: 1, y: 2 }, { x: 3, y: 4 });
        expect(s.removePair("p001").ok).toBe(true);
        expect(s.data.pairs).toHaveLength(0);
        expect(s.removePair("p001").ok).toBe(false);
    });
});

describe("line segments", () => {
    it("rejects drags at or below the minimum length", () => {
        const s = loaded();
        const short = s.addLineSegment("A", 0, { x: 10, y: 10 }, { x: 12, y: 10 });
        expect(short.ok).toBe(false);
        expect(short.reason).toMatch(/too short/);
        expect(
            s.addLineSegment("A", 0, { x: 10, y: 10 }, { x: 10 + MIN_DRAG_PX, y: 10 }).ok
        ).toBe(false);
        expect(
            s.addLineSegment("A", 0, { x: 10, y: 10 }, { x: 16, y: 10 }).ok
        ).toBe(true);
    });

    it("rejects plane ids outside 0..2 at runtime", () => {
        const s = loaded();
        const result = s.addLineSegment("A", 3 as never, { x: 0, y: 0 }, { x: 50, y: 0 });
        expect(result.ok).toBe(false);
    });

    it("keeps per-view collections separate", () => {
        const s = loaded();
        s.addLineSegment("A", 0, { x: 0, y: 0 }, { x: 50, y: 0 });
        s.addLineSegment("B", 1, { x: 0, y: 0 }, { x: 0, y: 50 });
        expect(s.linesFor("A")).toHaveLength(1);
        expect(s.linesFor("B")).toHaveLength(1);
        expect(s.linesFor("B")[0]!.planeId).toBe(1);
    });
});
