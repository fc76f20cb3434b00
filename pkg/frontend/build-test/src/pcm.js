/** PCM helpers for the /audio channel (int16 LE mono). */
export function pcm16ToFloat32(buffer) {
    const ints = new Int16Array(buffer);
    const out = new Float32Array(ints.length);
    for (let i = 0; i < ints.length; i++) {
        out[i] = ints[i] / 32767;
    }
    return out;
}
