// Client-side reconstruction of the directional mixture drawn in the polar
// inset, using the same concentration mapping as the server.

export function besselI0(x: number): number {
  if (x < 0) throw new Error("negative argument");
  if (x < 15) {
    const q = 0.25 * x * x;
    let term = 1.0;
    let total = 1.0;
    let k = 0;
    while (term > 1e-17 * total) {
      k += 1;
      term *= q / (k * k);
      total += term;
    }
    return total;
  }
  let total = 1.0;
  let term = 1.0;
  for (let k = 1; k < 40; k++) {
    const next = (term * (2 * k - 1) ** 2) / (8 * k * x);
    if (next >= term) break;
    term = next;
    total += term;
    if (term < 1e-17 * total) break;
  }
  return (total * Math.exp(x)) / Math.sqrt(2 * Math.PI * x);
}

export function vmPdf(x: number, mode: number, kappa: number): number {
  return Math.exp(kappa * Math.cos(x - mode)) / (2 * Math.PI * besselI0(kappa));
}

export interface MixtureComponent {
  mode: number;
  kappa: number;
  weight: number;
}

export function mixtureFromActions(
  subActions: [number, number][],
  scores: number[],
  kappaMin: number,
  kappaScale: number,
): MixtureComponent[] {
  return subActions.map((action, g) => {
    const magnitude = Math.hypot(action[0], action[1]);
    const moving = magnitude > 1e-12;
    return {
      mode: moving ? Math.atan2(action[1], action[0]) : 0,
      kappa: moving ? kappaMin + kappaScale * scores[g] : kappaMin,
      weight: scores[g],
    };
  });
}

export function mixturePdf(components: MixtureComponent[], x: number): number {
  let total = 0;
  for (const c of components) {
    total += c.weight * vmPdf(x, c.mode, c.kappa);
  }
  return total;
}

export function densitySamples(
  components: MixtureComponent[],
  count: number,
): { angles: number[]; values: number[] } {
  const angles: number[] = [];
  const values: number[] = [];
  for (let i = 0; i < count; i++) {
    const angle = -Math.PI + (2 * Math.PI * i) / count;
    angles.push(angle);
    values.push(mixturePdf(components, angle));
  }
  return { angles, values };
}

export function densityPeakAngle(components: MixtureComponent[], count = 720): number {
  const { angles, values } = densitySamples(components, count);
  let best = 0;
  for (let i = 1; i < values.length; i++) {
    if (values[i] > values[best]) best = i;
  }
  return angles[best];
}
