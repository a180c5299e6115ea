/**
 * View transform between image space and screen space.
 *
 * screen = image * zoom + pan. Stored annotations always live in image
 * space; clicks are inverse-transformed at the moment they happen, so
 * zooming or panning afterwards cannot alter stored coordinates.
 */

import { ImagePoint, ViewTransform } from "./types.js";

export function toScreen(t: ViewTransform, p: ImagePoint): ImagePoint {
    return { x: p.x * t.zoom + t.panX, y: p.y * t.zoom + t.panY };
}

export function toImage(t: ViewTransform, screen: ImagePoint): ImagePoint {
    return { x: (screen.x - t.panX) / t.zoom, y: (screen.y - t.panY) / t.zoom };
}

/** Zoom by `factor` keeping the screen point `anchor` fixed. */
export function zoomAt(t: ViewTransform, anchor: ImagePoint, factor: number): ViewTransform {
    const zoom = Math.min(64, Math.max(1 / 16, t.zoom * factor));
    const applied = zoom / t.zoom;
    return {
        zoom,
        panX: anchor.x - (anchor.x - t.panX) * applied,
        panY: anchor.y - (anchor.y - t.panY) * applied,
    };
}

export function panBy(t: ViewTransform, dx: number, dy: number): ViewTransform {
    return { zoom: t.zoom, panX: t.panX + dx, panY: t.panY + dy };
}
