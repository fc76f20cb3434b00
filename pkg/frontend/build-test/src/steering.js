/**
 * Keyboard/slider steering along a fixed planned axis.
 *
 * The client owns one number: insertion depth along the planned line.
 * Pose commands are coalesced so at most `maxRateHz` reach the engine;
 * intermediate positions collapse into the latest value.
 */
function normalize(v) {
    const n = Math.hypot(v[0], v[1], v[2]);
    if (n === 0)
        throw new Error("steering axis must be nonzero");
    return [v[0] / n, v[1] / n, v[2] / n];
}
export class SteeringController {
    constructor(opts) {
        this.depthMm = 0;
        this.dirty = false;
        this.enabled = false;
        this.lastSentAtMs = -Infinity;
        this.entry = [...opts.entry];
        this.axis = normalize(opts.axis);
        this.stepMm = opts.stepMm ?? 0.5;
        this.minSendIntervalMs = 1000 / (opts.maxRateHz ?? 60);
        this.minDepth = opts.minDepthMm ?? 0;
        this.maxDepth = opts.maxDepthMm ?? 150;
    }
    get depth() {
        return this.depthMm;
    }
    get isEnabled() {
        return this.enabled;
    }
    setEnabled(on) {
        this.enabled = on;
    }
    /** Advance (+1) or retract (-1) one step; ignored while disabled. */
    step(direction) {
        if (!this.enabled)
            return;
        this.setDepth(this.depthMm + direction * this.stepMm);
    }
    setDepth(mm) {
        if (!this.enabled)
            return;
        const clamped = Math.min(this.maxDepth, Math.max(this.minDepth, mm));
        if (clamped !== this.depthMm) {
            this.depthMm = clamped;
            this.dirty = true;
        }
    }
    tipAt(depthMm) {
        return [
            this.entry[0] + depthMm * this.axis[0],
            this.entry[1] + depthMm * this.axis[1],
            this.entry[2] + depthMm * this.axis[2],
        ];
    }
    /** The pose command due now, or null (not dirty / rate-limited / disabled). */
    poll(nowMs) {
        if (!this.enabled || !this.dirty)
            return null;
        if (nowMs - this.lastSentAtMs < this.minSendIntervalMs)
            return null;
        this.dirty = false;
        this.lastSentAtMs = nowMs;
        return { cmd: "pose", tip: this.tipAt(this.depthMm), axis: [...this.axis] };
    }
    resetDepth() {
        this.depthMm = 0;
        this.dirty = false;
    }
}
