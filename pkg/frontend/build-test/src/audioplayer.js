/**
 * Queued WebAudio playback of streamed PCM blocks.
 *
 * Browsers refuse to start an AudioContext before a user gesture, so the
 * player is created on demand. The queue keeps at most ~200 ms scheduled
 * ahead; older backlog is dropped (live stream, latest-value semantics).
 */
import { pcm16ToFloat32 } from "./pcm.js";
const MAX_BUFFER_S = 0.2;
export class AudioPlayer {
    constructor(sampleRate = 48000) {
        this.ctx = null;
        this.nextStartTime = 0;
        this.dropped = 0;
        this.sampleRate = sampleRate;
    }
    get running() {
        return this.ctx !== null && this.ctx.state === "running";
    }
    /** Must be called from a user-gesture handler the first time. */
    async enable() {
        if (this.ctx === null) {
            this.ctx = new AudioContext({ sampleRate: this.sampleRate });
        }
        if (this.ctx.state !== "running") {
            await this.ctx.resume();
        }
    }
    push(chunk) {
        const ctx = this.ctx;
        if (!ctx || ctx.state !== "running")
            return;
        const now = ctx.currentTime;
        if (this.nextStartTime - now > MAX_BUFFER_S) {
            this.dropped += 1;
            return;
        }
        const samples = pcm16ToFloat32(chunk);
        const buffer = ctx.createBuffer(1, samples.length, this.sampleRate);
        buffer.getChannelData(0).set(samples);
        const src = ctx.createBufferSource();
        src.buffer = buffer;
        src.connect(ctx.destination);
        const startAt = Math.max(now + 0.02, this.nextStartTime);
        src.start(startAt);
        this.nextStartTime = startAt + samples.length / this.sampleRate;
    }
}
