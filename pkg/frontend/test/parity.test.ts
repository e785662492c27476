/**
 * Parity harness: every bound operation against the frozen native fixtures.
 *
 * Fixture logits are float32-representable, so the dump transport is
 * lossless and the native tool sees bit-identical inputs; expected values
 * were computed by the native library at fixture-generation time.
 */

import { readFileSync } from "node:fs";
import { describe, expect, test } from "vitest";

import {
  bildLoss,
  BufferView,
  kurtosis,
  matrixView,
  overlapAtK,
  sequenceLoss,
  topkMass,
  vectorView,
} from "../src/index.js";

const fixtures = JSON.parse(
  readFileSync(new URL("./fixtures.json", import.meta.url), "utf8"));

const TOLERANCE = 1e-12;
const SPAWN_TIMEOUT = 300_000;

function vec(values: number[]): BufferView {
  return vectorView(Float64Array.from(values));
}

function mat(values: number[][]): BufferView {
  return matrixView(Float64Array.from(values.flat()), values.length, values[0]!.length);
}

function expectClose(got: number, want: number, label: string): void {
  expect(Math.abs(got - want), `${label}: got ${got}, want ${want}`)
    .toBeLessThanOrEqual(TOLERANCE);
}

function expectArrayClose(got: ArrayLike<number>, want: number[], label: string): void {
  expect(got.length, `${label}: length`).toBe(want.length);
  for (let i = 0; i < want.length; i++) {
    expectClose(got[i]!, want[i]!, `${label}[${i}]`);
  }
}

describe("parity with the native library", () => {
  test("bild_loss matches on every fixture, values and gradients", { timeout: SPAWN_TIMEOUT }, () => {
    for (const [i, f] of fixtures.bild_loss.entries()) {
      const result = bildLoss(vec(f.zt), vec(f.zs), f.temperature, f.k, true);
      expectClose(result.mean, f.value, `bild_loss[${i}]`);
      expect(result.degenerate).toBe(f.degenerate);
      expect(result.gradient!.shape).toEqual([f.zt.length]);
      expectArrayClose(result.gradient!.data, f.gradient, `bild_loss[${i}].gradient`);
    }
  });

  test("bild_loss of identical buffers is exactly zero", { timeout: SPAWN_TIMEOUT }, () => {
    const f = fixtures.bild_loss[1];
    expect(f.zt).toEqual(f.zs);
    expect(bildLoss(vec(f.zt), vec(f.zs), f.temperature, f.k).mean).toBe(0.0);
  });

  test("sequence_loss matches across methods, masks, and gradients", { timeout: SPAWN_TIMEOUT }, () => {
    for (const [i, f] of fixtures.sequence_loss.entries()) {
      const spec = { method: f.method, temperature: f.temperature, ...(f.k === null ? {} : { k: f.k }) };
      const result = sequenceLoss(mat(f.teacher), mat(f.student), spec,
        { roleMask: f.mask, wantGradient: true });
      expectClose(result.mean, f.mean, `sequence_loss[${i}] (${f.method})`);
      expectArrayClose(result.perPosition, f.per_position, `sequence_loss[${i}].per_position`);
      expect(result.gradient!.shape).toEqual([f.teacher.length, f.teacher[0].length]);
      expectArrayClose(result.gradient!.data, f.gradient.flat(),
        `sequence_loss[${i}].gradient`);
    }
  });

  test("overlap_at_k matches, and identical traces give exactly 1.0", { timeout: SPAWN_TIMEOUT }, () => {
    for (const [i, f] of fixtures.overlap.entries()) {
      const result = overlapAtK(mat(f.teacher), mat(f.student), f.k, f.mask);
      expectClose(result.mean, f.mean, `overlap[${i}]`);
      expectArrayClose(result.perPosition, f.per_position, `overlap[${i}].per_position`);
      expect(result.k).toBe(f.k);
    }
    expect(fixtures.overlap[0].teacher).toEqual(fixtures.overlap[0].student);
    expect(fixtures.overlap[0].mean).toBe(1.0);
  });

  test("kurtosis matches, including the length-1000 one-hot", { timeout: SPAWN_TIMEOUT }, () => {
    for (const [i, f] of fixtures.kurtosis.entries()) {
      expectClose(kurtosis(vec(f.z)), f.value, `kurtosis[${i}]`);
    }
    // The first fixture is the one-hot: kurtosis = 1000^2/999 - 3.
    expect(Math.abs(fixtures.kurtosis[0].value - (1000 * 1000 / 999 - 3)))
      .toBeLessThanOrEqual(1e-6);
  });

  test("topk_mass matches on every fixture", { timeout: SPAWN_TIMEOUT }, () => {
    for (const [i, f] of fixtures.topk_mass.entries()) {
      expectClose(topkMass(vec(f.z), f.k), f.value, `topk_mass[${i}]`);
    }
  });
});
