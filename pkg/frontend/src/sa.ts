import { Descriptors, getRingInfo } from "openchem";
import type { Molecule } from "openchem";

/**
 * Synthetic-accessibility estimate on the 1 (easy) .. 10 (hard) scale,
 * built from topological complexity descriptors: molecule size, ring
 * fusion (spiro / bridgehead atoms), macrocycles, and stereocenters.
 * Unlike fragment-contribution scores it carries no fragment database,
 * so treat it as a complexity ranking rather than a calibrated score.
 */
export function computeSA(mol: Molecule): number {
  const d = Descriptors.all(mol);
  const heavy = Math.max(d.heavyAtoms, 1);

  const sizePenalty = Math.pow(heavy, 1.005) - heavy;
  const spiroPenalty = Math.log(d.spiroAtoms + 1);
  const bridgePenalty = 2 * Math.log(d.bridgeheadAtoms + 1);
  const stereoPenalty = Math.log(d.stereocenters + 1);

  let macroPenalty = 0;
  const rings: number[][] = getRingInfo(mol).sssr ?? [];
  for (const ring of rings) {
    if (ring.length > 8) {
      macroPenalty = Math.log(2);
      break;
    }
  }

  // dense ring systems are harder to make than isolated rings
  const ringDensity = d.rings > 0 ? d.rings / Math.max(heavy / 6, 1) : 0;
  const fusionPenalty = Math.max(0, ringDensity - 1);

  // heteroatom-rich scaffolds add steps; plain hydrocarbons are easy
  const heteroPenalty = d.heteroAtoms / heavy;

  const raw =
    1 +
    0.6 * sizePenalty +
    spiroPenalty +
    bridgePenalty +
    stereoPenalty +
    macroPenalty +
    fusionPenalty +
    heteroPenalty;
  return Math.min(10, Math.max(1, raw));
}
