// Small scale helpers for the SVG charts. Pure functions, exported so the
// chart tests can compute expected pixel positions independently.

export interface LinearScale {
  (value: number): number;
  invert(px: number): number;
  domain: [number, number];
  range: [number, number];
  ticks(count?: number): number[];
}

export function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === Infinity) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): LinearScale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 || 1;
  const scale = ((value: number) => r0 + ((value - d0) / span) * (r1 - r0)) as LinearScale;
  scale.invert = (px: number) => d0 + ((px - r0) / (r1 - r0 || 1)) * span;
  scale.domain = domain;
  scale.range = range;
  scale.ticks = (count = 5) => niceTicks(d0, d1, count);
  return scale;
}

export function niceTicks(lo: number, hi: number, count = 5): number[] {
  if (lo === hi) return [lo];
  const rawStep = (hi - lo) / Math.max(1, count);
  const magnitude = 10 ** Math.floor(Math.log10(rawStep));
  const residual = rawStep / magnitude;
  const step = (residual >= 5 ? 5 : residual >= 2 ? 2 : 1) * magnitude;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + step / 1e6; v += step) {
    ticks.push(Math.round(v * 1e9) / 1e9);
  }
  return ticks;
}

export interface BandScale {
  position(value: string): number;
  bandwidth(): number;
  domain: string[];
  /** Index of the band covering the pixel, clamped to the domain. */
  indexAt(px: number): number;
}

export function bandScale(
  domain: string[],
  range: [number, number],
  padding = 0.1,
): BandScale {
  const [r0, r1] = range;
  const n = Math.max(1, domain.length);
  const step = (r1 - r0) / n;
  const band = step * (1 - padding);
  return {
    position: (value) => {
      const i = domain.indexOf(value);
      return r0 + (i < 0 ? 0 : i) * step + (step - band) / 2;
    },
    bandwidth: () => band,
    domain,
    indexAt: (px) => {
      const i = Math.floor((px - r0) / (step || 1));
      return Math.min(Math.max(i, 0), n - 1);
    },
  };
}

/** Parse a bin label like "[160,165)" or "[175,180]" into its bounds. */
export function parseBinLabel(label: string): [number, number] | null {
  const match = /^\[(-?[\d.eE+-]+),(-?[\d.eE+-]+)[)\]]$/.exec(label);
  if (!match) return null;
  const lo = Number(match[1]);
  const hi = Number(match[2]);
  if (Number.isNaN(lo) || Number.isNaN(hi)) return null;
  return [lo, hi];
}
