/** Seeded PRNG primitives on BigInt 64-bit arithmetic.
 *
 * Same conventions as the benchmarking engine's generator, so seeded
 * weights reproduce exactly across runs and machines:
 *
 * - splitmix64 advances by the golden-gamma constant; output is the
 *   murmur-style finalizer of the advanced state.
 * - xoshiro256** is seeded with four consecutive splitmix64 outputs.
 * - nextFloat() = top 53 bits / 2^53, uniform on [0, 1).
 * - Box-Muller pair i consumes uniform draws (2i, 2i+1); the first is
 *   mapped to (0, 1] as 1 - u so the log never sees zero.
 */

const MASK64 = (1n << 64n) - 1n;
const GOLDEN = 0x9e3779b97f4a7c15n;
const INV_2_53 = 2 ** -53;
const FNV_OFFSET = 0xcbf29ce484222325n;
const FNV_PRIME = 0x100000001b3n;

export function splitmix64Mix(z: bigint): bigint {
  z &= MASK64;
  z = ((z ^ (z >> 30n)) * 0xbf58476d1ce4e5b9n) & MASK64;
  z = ((z ^ (z >> 27n)) * 0x94d049bb133111ebn) & MASK64;
  return z ^ (z >> 31n);
}

export class SplitMix64 {
  private state: bigint;

  constructor(seed: bigint) {
    this.state = seed & MASK64;
  }

  nextU64(): bigint {
    this.state = (this.state + GOLDEN) & MASK64;
    return splitmix64Mix(this.state);
  }
}

export function fnv1a64(text: string): bigint {
  const bytes = new TextEncoder().encode(text);
  let h = FNV_OFFSET;
  for (const b of bytes) {
    h = ((h ^ BigInt(b)) * FNV_PRIME) & MASK64;
  }
  return h;
}

/** Fold key components (strings or ints) into a base seed so that named
 *  substreams (one per weight tensor, per image, ...) never collide. */
export function deriveStreamSeed(
  seed: bigint,
  ...components: Array<bigint | number | string>
): bigint {
  let acc = splitmix64Mix(seed);
  for (const comp of components) {
    const value =
      typeof comp === "string" ? fnv1a64(comp) : BigInt(comp) & MASK64;
    acc = splitmix64Mix(acc ^ value);
  }
  return acc;
}

function rotl(x: bigint, k: bigint): bigint {
  return ((x << k) | (x >> (64n - k))) & MASK64;
}

export class Xoshiro256StarStar {
  private s0: bigint;
  private s1: bigint;
  private s2: bigint;
  private s3: bigint;

  constructor(seed: bigint) {
    const sm = new SplitMix64(seed);
    this.s0 = sm.nextU64();
    this.s1 = sm.nextU64();
    this.s2 = sm.nextU64();
    this.s3 = sm.nextU64();
  }

  nextU64(): bigint {
    const result = (rotl((this.s1 * 5n) & MASK64, 7n) * 9n) & MASK64;
    const t = (this.s1 << 17n) & MASK64;
    this.s2 ^= this.s0;
    this.s3 ^= this.s1;
    this.s1 ^= this.s2;
    this.s0 ^= this.s3;
    this.s2 ^= t;
    this.s3 = rotl(this.s3, 45n);
    return result;
  }

  /** Uniform double on [0, 1) from the top 53 bits. */
  nextFloat(): number {
    return Number(this.nextU64() >> 11n) * INV_2_53;
  }

  /** n standard normals via Box-Muller on sequential uniform pairs. */
  gaussians(n: number): Float64Array {
    const out = new Float64Array(n);
    const pairs = Math.ceil(n / 2);
    for (let i = 0; i < pairs; i++) {
      const u1 = 1.0 - this.nextFloat(); // (0, 1]: log is always finite
      const u2 = this.nextFloat();
      const r = Math.sqrt(-2.0 * Math.log(u1));
      const theta = 2.0 * Math.PI * u2;
      out[2 * i] = r * Math.cos(theta);
      if (2 * i + 1 < n) {
        out[2 * i + 1] = r * Math.sin(theta);
      }
    }
    return out;
  }
}
