/**
 * Canvas cross-section view: cardiac contours for the snapshot's frame,
 * the needle line, and the planned track. Pure drawing; all values come
 * from the store.
 */
import { stateColor } from "./colors.js";
export function fitView(scene, width, height, marginPx = 30) {
    let lo = Infinity;
    let hi = -Infinity;
    for (const frame of scene.frames) {
        for (const loops of [frame.pericardium, frame.myocardium]) {
            for (const loop of loops) {
                for (const [u, v] of loop) {
                    lo = Math.min(lo, u, v);
                    hi = Math.max(hi, u, v);
                }
            }
        }
    }
    if (!Number.isFinite(lo)) {
        lo = -60;
        hi = 60;
    }
    const span = Math.max(hi - lo, 1);
    const scale = Math.min(width - 2 * marginPx, height - 2 * marginPx) / span;
    const mid = (lo + hi) / 2;
    return {
        scale,
        cx: width / 2,
        cy: height / 2,
        toX(u) {
            return this.cx + (u - mid) * this.scale;
        },
        toY(v) {
            return this.cy - (v - mid) * this.scale;
        },
    };
}
function drawLoops(ctx, view, loops, stroke, lineWidth) {
    ctx.strokeStyle = stroke;
    ctx.lineWidth = lineWidth;
    for (const loop of loops) {
        if (loop.length < 2)
            continue;
        ctx.beginPath();
        ctx.moveTo(view.toX(loop[0][0]), view.toY(loop[0][1]));
        for (const [u, v] of loop.slice(1)) {
            ctx.lineTo(view.toX(u), view.toY(v));
        }
        ctx.stroke();
    }
}
export function drawScene(ctx, width, height, scene, snapshot, plannedEntry, plannedAxis) {
    ctx.fillStyle = "#10151a";
    ctx.fillRect(0, 0, width, height);
    if (!scene || scene.frames.length === 0) {
        ctx.fillStyle = "#90a4ae";
        ctx.font = "14px system-ui, sans-serif";
        ctx.fillText("waiting for scene ...", 20, 30);
        return;
    }
    const view = fitView(scene, width, height);
    const frameIndex = snapshot?.frame ?? 0;
    const frame = scene.frames[Math.max(0, Math.min(scene.frames.length - 1, frameIndex))];
    drawLoops(ctx, view, frame.myocardium, "#8d4b4b", 2.0);
    drawLoops(ctx, view, frame.pericardium, "#4b728d", 2.0);
    // Planned track: a faint line through the entry along the axis.
    // The cross-section plane keeps (y, z); x is depth out of the plane.
    const track = {
        u0: plannedEntry[1] - plannedAxis[1] * 200,
        v0: plannedEntry[2] - plannedAxis[2] * 200,
        u1: plannedEntry[1] + plannedAxis[1] * 200,
        v1: plannedEntry[2] + plannedAxis[2] * 200,
    };
    ctx.strokeStyle = "#37474f";
    ctx.setLineDash([6, 6]);
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(view.toX(track.u0), view.toY(track.v0));
    ctx.lineTo(view.toX(track.u1), view.toY(track.v1));
    ctx.stroke();
    ctx.setLineDash([]);
    // Crosshair at the planned entry point.
    const ex = view.toX(plannedEntry[1]);
    const ey = view.toY(plannedEntry[2]);
    ctx.strokeStyle = "#78909c";
    ctx.beginPath();
    ctx.moveTo(ex - 8, ey);
    ctx.lineTo(ex + 8, ey);
    ctx.moveTo(ex, ey - 8);
    ctx.lineTo(ex, ey + 8);
    ctx.stroke();
    const pose = snapshot?.pose;
    if (pose) {
        const tipU = pose.tip[1];
        const tipV = pose.tip[2];
        const tailU = tipU - pose.axis[1] * 40;
        const tailV = tipV - pose.axis[2] * 40;
        ctx.strokeStyle = "#eceff1";
        ctx.lineWidth = 3;
        ctx.beginPath();
        ctx.moveTo(view.toX(tailU), view.toY(tailV));
        ctx.lineTo(view.toX(tipU), view.toY(tipV));
        ctx.stroke();
        ctx.fillStyle = stateColor(snapshot?.state ?? null);
        ctx.beginPath();
        ctx.arc(view.toX(tipU), view.toY(tipV), 5, 0, 2 * Math.PI);
        ctx.fill();
    }
}
