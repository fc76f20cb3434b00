/**
 * WebSocket glue for the three engine channels.
 *
 * The socket implementation is injected so the same class runs in the
 * browser (native WebSocket) and under node tests (the `ws` package,
 * which exposes the same onopen/onmessage/onclose surface).
 */
import { reconnectDelayMs } from "./backoff.js";
export class SessionClient {
    constructor(baseUrl, store, opts) {
        this.connected = false;
        this.attempts = 0;
        this.sockets = {};
        this.closedByUser = false;
        this.baseUrl = baseUrl.replace(/\/$/, "");
        this.store = store;
        this.opts = opts;
        this.now = opts.now ?? (() => Date.now());
    }
    connect() {
        this.closedByUser = false;
        this.openChannel("state");
        this.openChannel("audio");
        this.openChannel("control");
    }
    close() {
        this.closedByUser = true;
        for (const ws of Object.values(this.sockets)) {
            try {
                ws.close();
            }
            catch {
                // already gone
            }
        }
        this.sockets = {};
        this.connected = false;
    }
    sendCommand(cmd) {
        const ws = this.sockets.control;
        if (!ws || !this.connected)
            return false; // dropped while disconnected
        try {
            ws.send(JSON.stringify(cmd));
            return true;
        }
        catch {
            return false;
        }
    }
    nextReconnectDelayMs() {
        return reconnectDelayMs(this.attempts);
    }
    openChannel(name) {
        const ws = this.opts.wsFactory(`${this.baseUrl}/${name}`);
        this.sockets[name] = ws;
        if (name === "audio")
            ws.binaryType = "arraybuffer";
        ws.onopen = () => {
            if (name === "state") {
                this.connected = true;
                this.attempts = 0;
            }
        };
        ws.onmessage = (ev) => this.dispatch(name, ev.data);
        ws.onerror = () => undefined;
        ws.onclose = () => {
            delete this.sockets[name];
            if (name === "state") {
                this.connected = false;
                if (!this.closedByUser)
                    this.scheduleReconnect();
            }
        };
    }
    dispatch(name, data) {
        if (name === "state" && typeof data === "string") {
            this.store.update(data, this.now());
        }
        else if (name === "state" && data instanceof Uint8Array) {
            this.store.update(new TextDecoder().decode(data), this.now());
        }
        else if (name === "audio" && this.opts.onAudio) {
            if (data instanceof ArrayBuffer) {
                this.opts.onAudio(data);
            }
            else if (ArrayBuffer.isView(data)) {
                const view = data;
                this.opts.onAudio(view.buffer.slice(view.byteOffset, view.byteOffset + view.byteLength));
            }
        }
        else if (name === "control" && this.opts.onControlReply) {
            try {
                this.opts.onControlReply(JSON.parse(String(data)));
            }
            catch {
                // junk replies are dropped
            }
        }
    }
    scheduleReconnect() {
        const delay = this.nextReconnectDelayMs();
        this.attempts += 1;
        const timer = this.opts.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
        timer(() => {
            if (!this.closedByUser)
                this.connect();
        }, delay);
    }
}
