/** Zone badge palette: the only client-side mapping applied to a state. */

import type { ZoneId } from "./protocol.js";

export const ZONE_COLORS: Record<ZoneId, string> = {
  S1: "#9e9e9e", // outer zone: gray
  S2: "#ffb300", // pre-puncture: amber
  S3: "#43a047", // safe puncture: green
  S4: "#e53935", // myocardium danger: red
};

export const NO_ZONE_COLOR = "#546e7a";

export function stateColor(state: ZoneId | null | undefined): string {
  return state ? ZONE_COLORS[state] : NO_ZONE_COLOR;
}

export const ZONE_LABELS: Record<ZoneId, string> = {
  S1: "outer zone",
  S2: "pre-puncture",
  S3: "safe puncture",
  S4: "MYOCARDIUM",
};
