import { Descriptors, matchSMARTS } from "openchem";
import type { Molecule } from "openchem";

/**
 * Quantitative estimate of drug-likeness computed from openchem descriptors
 * with the published desirability-function parameters (mean weighting).
 * The structural-alert count uses a reduced SMARTS set, so values can differ
 * slightly from toolkits shipping the full alert catalogue; the score is
 * deterministic for a fixed package version.
 */

interface AdsParams {
  a: number;
  b: number;
  c: number;
  d: number;
  e: number;
  f: number;
  dmax: number;
}

const ADS: Record<string, AdsParams> = {
  mw: {
    a: 2.817065973,
    b: 392.5754953,
    c: 290.7489764,
    d: 2.419764353,
    e: 49.22325677,
    f: 65.37051707,
    dmax: 104.9805561,
  },
  alogp: {
    a: 3.172690585,
    b: 137.8624751,
    c: 2.534937431,
    d: 4.581497897,
    e: 0.822739154,
    f: 0.576295591,
    dmax: 131.3186604,
  },
  hba: {
    a: 2.948620388,
    b: 160.4605972,
    c: 3.615294657,
    d: 4.435986202,
    e: 0.290141953,
    f: 1.300669958,
    dmax: 148.7763046,
  },
  hbd: {
    a: 1.618662227,
    b: 1010.051101,
    c: 0.985094388,
    d: 0.000000001,
    e: 0.713820843,
    f: 0.920922555,
    dmax: 258.1632616,
  },
  psa: {
    a: 1.876861559,
    b: 125.2232657,
    c: 62.90773554,
    d: 87.83366614,
    e: 12.01999824,
    f: 28.51324732,
    dmax: 104.5686167,
  },
  rotb: {
    a: 0.010000091,
    b: 272.4121427,
    c: 2.55837997,
    d: 1.565547684,
    e: 1.271567166,
    f: 2.758063707,
    dmax: 105.4420403,
  },
  arom: {
    a: 3.21778897,
    b: 957.7374108,
    c: 2.274627939,
    d: 0.000000001,
    e: 1.317690384,
    f: 0.375760881,
    dmax: 312.337261,
  },
  alerts: {
    a: 0.01,
    b: 1199.094025,
    c: -0.09002883,
    d: 0.000000001,
    e: 0.185904477,
    f: 0.875193782,
    dmax: 417.725314,
  },
};

const WEIGHTS: Record<string, number> = {
  mw: 0.66,
  alogp: 0.46,
  hba: 0.05,
  hbd: 0.61,
  psa: 0.06,
  rotb: 0.65,
  arom: 0.48,
  alerts: 0.95,
};

// Reduced structural-alert catalogue: common reactive / unstable motifs.
const ALERT_SMARTS: string[] = [
  "[N+](=O)[O-]", // nitro
  "C(=O)[Cl,Br,I]", // acyl halide
  "[CX3H1](=O)[#6]", // aldehyde
  "N=C=O", // isocyanate
  "N=C=S", // isothiocyanate
  "[SH]", // thiol
  "OO", // peroxide
  "N=N", // azo
  "[NX3][NX3]", // hydrazine
  "C1OC1", // epoxide
  "C1NC1", // aziridine
  "[CX3]=[CX3][CX3]=O", // Michael acceptor
  "CCCCCCCC", // long aliphatic chain
];

function ads(x: number, p: AdsParams): number {
  const raw =
    p.a +
    (p.b / (1 + Math.exp(-(x - p.c + p.d / 2) / p.e))) *
      (1 - 1 / (1 + Math.exp(-(x - p.c - p.d / 2) / p.f)));
  return Math.min(Math.max(raw / p.dmax, 1e-6), 1.0);
}

export function countAlerts(mol: Molecule): number {
  let count = 0;
  for (const smarts of ALERT_SMARTS) {
    const result = matchSMARTS(smarts, mol);
    if (result.success && result.matches.length > 0) {
      count += 1;
    }
  }
  return count;
}

export function computeQED(mol: Molecule): number {
  const d = Descriptors.all(mol);
  const values: Record<string, number> = {
    mw: d.mass,
    alogp: d.logP,
    hba: d.hbondAcceptors,
    hbd: d.hbondDonors,
    psa: d.tpsa,
    rotb: d.rotatableBonds,
    arom: d.aromaticRings,
    alerts: countAlerts(mol),
  };
  let num = 0;
  let den = 0;
  for (const key of Object.keys(ADS)) {
    const w = WEIGHTS[key]!;
    num += w * Math.log(ads(values[key]!, ADS[key]!));
    den += w;
  }
  return Math.exp(num / den);
}
