export type ViewId = "A" | "B";

export type PlaneId = 0 | 1 | 2;

export interface ImagePoint {
    x: number;
    y: number;
}

/** One manually matched point; a side stays null until that view is clicked. */
export interface PointPair {
    id: string;
    a: ImagePoint | null;
    b: ImagePoint | null;
}

export interface LineAnnotation {
    planeId: PlaneId;
    view: ViewId;
    x0: number;
    y0: number;
    x1: number;
    y1: number;
}

export interface ImageRef {
    name: string;
    width: number;
    height: number;
    /** data URL kept so a saved session restores its render state */
    dataUrl: string;
}

/** Screen = image * zoom + pan (pan in screen pixels). */
export interface ViewTransform {
    zoom: number;
    panX: number;
    panY: number;
}

export interface SessionData {
    imageA: ImageRef | null;
    imageB: ImageRef | null;
    pairs: PointPair[];
    lines: LineAnnotation[];
    viewA: ViewTransform;
    viewB: ViewTransform;
    nextPairNumber: number;
}

export function isComplete(pair: PointPair): boolean {
    return pair.a !== null && pair.b !== null;
}

export function emptySession(): SessionData {
    return {
        imageA: null,
        imageB: null,
        pairs: [],
        lines: [],
        viewA: { zoom: 1, panX: 0, panY: 0 },
        viewB: { zoom: 1, panX: 0, panY: 0 },
        nextPairNumber: 1,
    };
}
