/**
 * DOM wiring for the annotator: two canvas views, point/line tools,
 * zoom and pan, export downloads and session save/load. All state lives
 * in one AnnotationSession; this layer only renders and forwards events.
 */

import { correspondencesCsv, linesCsv } from "./csv.js";
import { AnnotationSession } from "./session.js";
import { deserializeSession, serializeSession } from "./sessionio.js";
import { panBy, toImage, toScreen, zoomAt } from "./transform.js";
import { ImageRef, PlaneId, ViewId, isComplete } from "./types.js";

type Tool = "point" | "line" | "pan";

const PLANE_COLORS = ["#ffcc00", "#00ccff", "#ff66cc"];

interface ViewElements {
    canvas: HTMLCanvasElement;
    image: HTMLImageElement | null;
}

class App {
    session = new AnnotationSession();
    tool: Tool = "point";
    planeId: PlaneId = 0;
    views: Record<ViewId, ViewElements>;
    dragStart: { view: ViewId; x: number; y: number } | null = null;
    dragCurrent: { x: number; y: number } | null = null;
    status: HTMLElement;

    constructor() {
        this.views = {
            A: { canvas: this.el<HTMLCanvasElement>("canvas-a"), image: null },
            B: { canvas: this.el<HTMLCanvasElement>("canvas-b"), image: null },
        };
        this.status = this.el("status");
        this.bindToolbar();
        this.bindCanvas("A");
        this.bindCanvas("B");
        this.render();
    }

    el<T extends HTMLElement = HTMLElement>(id: string): T {
        const node = document.getElementById(id);
        if (!node) throw new Error(`missing element #${id}`);
        return node as T;
    }

    say(message: string, isError = false) {
        this.status.textContent = message;
        this.status.className = isError ? "status error" : "status";
    }

    transform(view: ViewId) {
        return view === "A" ? this.session.data.viewA : this.session.data.viewB;
    }

    setTransform(view: ViewId, t: { zoom: number; panX: number; panY: number }) {
        if (view === "A") this.session.data.viewA = t;
        else this.session.data.viewB = t;
    }

    bindToolbar() {
        for (const tool of ["point", "line", "pan"] as Tool[]) {
            this.el(`tool-${tool}`).addEventListener("click", () => {
                this.tool = tool;
                this.refreshToolButtons();
            });
        }
        const planeSelect = this.el<HTMLSelectElement>("plane-select");
        planeSelect.addEventListener("change", () => {
            this.planeId = Number(planeSelect.value) as PlaneId;
        });
        this.el("load-a").addEventListener("click", () => this.pickImage("A"));
        this.el("load-b").addEventListener("click", () => this.pickImage("B"));
        this.el("export-points").addEventListener("click", () => this.export("points"));
        this.el("export-lines").addEventListener("click", () => this.export("lines"));
        this.el("save-session").addEventListener("click", () => this.saveSession());
        this.el("load-session").addEventListener("click", () => this.loadSession());
        this.refreshToolButtons();
    }

    refreshToolButtons() {
        for (const tool of ["point", "line", "pan"] as Tool[]) {
            this.el(`tool-${tool}`).classList.toggle("active", this.tool === tool);
        }
    }

    pickImage(view: ViewId) {
        const input = document.createElement("input");
        input.type = "file";
        input.accept = "image/png";
        input.addEventListener("change", () => {
            const file = input.files?.[0];
            if (!file) return;
            const reader = new FileReader();
            reader.onload = () => {
                const dataUrl = String(reader.result);
                const img = new Image();
                img.onload = () => {
                    const ref: ImageRef = {
                        name: file.name,
                        width: img.naturalWidth,
                        height: img.naturalHeight,
                        dataUrl,
                    };
                    if (view === "A") this.session.data.imageA = ref;
                    else this.session.data.imageB = ref;
                    this.views[view].image = img;
                    this.say(`loaded ${file.name} into view ${view}`);
                    this.render();
                };
                img.src = dataUrl;
            };
            reader.readAsDataURL(file);
        });
        input.click();
    }

    canvasPoint(view: ViewId, ev: MouseEvent) {
        const rect = this.views[view].canvas.getBoundingClientRect();
        return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
    }

    bindCanvas(view: ViewId) {
        const canvas = this.views[view].canvas;
        canvas.addEventListener("mousedown", (ev) => {
            const p = this.canvasPoint(view, ev);
            if (this.tool === "point" && ev.button === 0) {
                const image = toImage(this.transform(view), p);
                const result = this.session.clickPoint(view, image);
                this.say(result.ok ? this.pendingMessage() : result.reason ?? "", !result.ok);
                this.render();
            } else {
                this.dragStart = { view, ...p };
                this.dragCurrent = { ...p };
            }
        });
        canvas.addEventListener("mousemove", (ev) => {
            if (!this.dragStart || this.dragStart.view !== view) return;
            const p = this.canvasPoint(view, ev);
            if (this.tool === "pan") {
                const prev = this.dragCurrent ?? this.dragStart;
                this.setTransform(view, panBy(this.transform(view), p.x - prev.x, p.y - prev.y));
            }
            this.dragCurrent = p;
            this.render();
        });
        canvas.addEventListener("mouseup", (ev) => {
            if (!this.dragStart || this.dragStart.view !== view) return;
            const start = this.dragStart;
            const end = this.canvasPoint(view, ev);
            this.dragStart = null;
            this.dragCurrent = null;
            if (this.tool === "line") {
                const t = this.transform(view);
                const result = this.session.addLineSegment(
                    view,
                    this.planeId,
                    toImage(t, start),
                    toImage(t, end)
                );
                this.say(result.ok ? `line added (plane ${this.planeId}, view ${view})` : result.reason ?? "", !result.ok);
            }
            this.render();
        });
        canvas.addEventListener("wheel", (ev) => {
            ev.preventDefault();
            const p = this.canvasPoint(view, ev);
            const factor = ev.deltaY < 0 ? 2 : 0.5;
            this.setTransform(view, zoomAt(this.transform(view), p, factor));
            this.render();
        });
    }

    pendingMessage(): string {
        const pending = this.session.pendingPair();
        if (!pending) return "pair complete";
        const waiting = pending.a === null ? "A" : "B";
        return `pair ${pending.id}: click the matching point in view ${waiting}`;
    }

    export(kind: "points" | "lines") {
        try {
            const text = kind === "points"
                ? correspondencesCsv(this.session.data)
                : linesCsv(this.session.data);
            this.download(kind === "points" ? "correspondences.csv" : "lines.csv", text);
            this.say(`exported ${kind}`);
        } catch (exc) {
            this.say((exc as Error).message, true);
        }
    }

    saveSession() {
        this.download("session.json", serializeSession(this.session.data));
        this.say("session saved");
    }

    loadSession() {
        const input = document.createElement("input");
        input.type = "file";
        input.accept = "application/json";
        input.addEventListener("change", () => {
            const file = input.files?.[0];
            if (!file) return;
            file.text().then((text) => {
                try {
                    this.session = new AnnotationSession(deserializeSession(text));
                } catch (exc) {
                    this.say((exc as Error).message, true);
                    return;
                }
                for (const view of ["A", "B"] as ViewId[]) {
                    const ref = view === "A" ? this.session.data.imageA : this.session.data.imageB;
                    if (ref) {
                        const img = new Image();
                        img.onload = () => this.render();
                        img.src = ref.dataUrl;
                        this.views[view].image = img;
                    } else {
                        this.views[view].image = null;
                    }
                }
                this.say(`session loaded (${this.session.data.pairs.length} pairs)`);
                this.render();
            });
        });
        input.click();
    }

    download(name: string, text: string) {
        const blob = new Blob([text], { type: "text/plain" });
        const a = document.createElement("a");
        a.href = URL.createObjectURL(blob);
        a.download = name;
        a.click();
        URL.revokeObjectURL(a.href);
    }

    renderView(view: ViewId) {
        const { canvas, image } = this.views[view];
        const ctx = canvas.getContext("2d");
        if (!ctx) return;
        const t = this.transform(view);
        ctx.fillStyle = "#202020";
        ctx.fillRect(0, 0, canvas.width, canvas.height);
        if (image) {
            ctx.save();
            ctx.imageSmoothingEnabled = t.zoom < 1;
            ctx.setTransform(t.zoom, 0, 0, t.zoom, t.panX, t.panY);
            ctx.drawImage(image, 0, 0);
            ctx.restore();
        }
        for (const line of this.session.linesFor(view)) {
            const p0 = toScreen(t, { x: line.x0, y: line.y0 });
            const p1 = toScreen(t, { x: line.x1, y: line.y1 });
            ctx.strokeStyle = PLANE_COLORS[line.planeId] ?? "#ffffff";
            ctx.lineWidth = 2;
            ctx.beginPath();
            ctx.moveTo(p0.x, p0.y);
            ctx.lineTo(p1.x, p1.y);
            ctx.stroke();
        }
        for (const pair of this.session.data.pairs) {
            const point = view === "A" ? pair.a : pair.b;
            if (!point) continue;
            const s = toScreen(t, point);
            const complete = isComplete(pair);
            ctx.strokeStyle = complete ? "#4caf50" : "#ff9800";
            ctx.lineWidth = 1.5;
            ctx.beginPath();
            ctx.arc(s.x, s.y, 5, 0, 2 * Math.PI);
            ctx.stroke();
            ctx.beginPath();
            ctx.moveTo(s.x - 8, s.y);
            ctx.lineTo(s.x + 8, s.y);
            ctx.moveTo(s.x, s.y - 8);
            ctx.lineTo(s.x, s.y + 8);
            ctx.stroke();
            ctx.fillStyle = complete ? "#4caf50" : "#ff9800";
            ctx.font = "11px sans-serif";
            ctx.fillText(pair.id, s.x + 7, s.y - 7);
        }
        if (this.dragStart && this.dragStart.view === view && this.dragCurrent && this.tool === "line") {
            ctx.strokeStyle = PLANE_COLORS[this.planeId] ?? "#ffffff";
            ctx.setLineDash([4, 4]);
            ctx.beginPath();
            ctx.moveTo(this.dragStart.x, this.dragStart.y);
            ctx.lineTo(this.dragCurrent.x, this.dragCurrent.y);
            ctx.stroke();
            ctx.setLineDash([]);
        }
    }

    renderList() {
        const list = this.el("annotation-list");
        list.innerHTML = "";
        for (const pair of this.session.data.pairs) {
            const row = document.createElement("div");
            row.className = isComplete(pair) ? "item" : "item incomplete";
            const label = document.createElement("span");
            label.textContent = `${pair.id}${isComplete(pair) ? "" : " (incomplete)"}`;
            label.title = "double-click to rename";
            label.addEventListener("dblclick", () => {
                const next = prompt(`rename ${pair.id}`, pair.id);
                if (next === null) return;
                const result = this.session.renamePair(pair.id, next);
                if (!result.ok) this.say(result.reason ?? "", true);
                this.render();
            });
            const remove = document.createElement("button");
            remove.textContent = "x";
            remove.addEventListener("click", () => {
                this.session.removePair(pair.id);
                this.render();
            });
            row.append(label, remove);
            list.append(row);
        }
        const counts = this.el("counts");
        counts.textContent =
            `${this.session.completePairs().length} complete pairs, ` +
            `${this.session.data.lines.length} lines`;
    }

    render() {
        this.renderView("A");
        this.renderView("B");
        this.renderList();
    }
}

window.addEventListener("DOMContentLoaded", () => {
    new App();
});
