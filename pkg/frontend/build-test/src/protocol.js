/**
 * Wire types for the engine's /state channel, plus strict validators.
 *
 * The client never derives zones or distances itself: everything shown in
 * the UI comes out of a validated snapshot.
 */
const ZONES = new Set(["S1", "S2", "S3", "S4"]);
function isFiniteNumber(x) {
    return typeof x === "number" && Number.isFinite(x);
}
function isNullableNumber(x) {
    return x === null || isFiniteNumber(x);
}
function isVec3(x) {
    return Array.isArray(x) && x.length === 3 && x.every(isFiniteNumber);
}
export class ProtocolError extends Error {
}
export function validateSnapshot(msg) {
    const m = msg;
    if (!m || m.type !== "snapshot")
        throw new ProtocolError("not a snapshot");
    if (!isFiniteNumber(m.seq) || !isFiniteNumber(m.t))
        throw new ProtocolError("bad seq/t");
    if (m.pose !== null) {
        const pose = m.pose;
        if (!pose || !isVec3(pose.tip) || !isVec3(pose.axis))
            throw new ProtocolError("bad pose");
    }
    if (!isNullableNumber(m.d_tp) || !isNullableNumber(m.d_tm))
        throw new ProtocolError("bad distances");
    if (m.state !== null && !ZONES.has(m.state))
        throw new ProtocolError("bad state");
    const control = m.control;
    if (!control ||
        !isFiniteNumber(control.f0) ||
        !isFiniteNumber(control.beta) ||
        !isFiniteNumber(control.alpha) ||
        !isFiniteNumber(control.delta_t_ms) ||
        !isFiniteNumber(control.force) ||
        !ZONES.has(control.state)) {
        throw new ProtocolError("bad control block");
    }
    const contacts = m.contacts;
    if (!contacts || typeof contacts.pericardium !== "boolean" || typeof contacts.myocardium !== "boolean") {
        throw new ProtocolError("bad contacts block");
    }
    const trial = m.trial;
    if (!trial || typeof trial.active !== "boolean")
        throw new ProtocolError("bad trial block");
    return m;
}
export function validateScene(msg) {
    const m = msg;
    if (!m || m.type !== "scene")
        throw new ProtocolError("not a scene");
    if (!Array.isArray(m.frames))
        throw new ProtocolError("scene without frames");
    return m;
}
export function parseStateMessage(raw) {
    let parsed;
    try {
        parsed = JSON.parse(raw);
    }
    catch {
        throw new ProtocolError("state message is not JSON");
    }
    const type = parsed?.type;
    if (type === "snapshot")
        return validateSnapshot(parsed);
    if (type === "scene")
        return validateScene(parsed);
    throw new ProtocolError(`unknown state message type: ${String(type)}`);
}
