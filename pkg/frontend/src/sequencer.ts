/** Stale-response protection: monotone request sequence numbers ensure an
 * out-of-order response never overwrites a newer edit's result. */

export class Sequencer {
  private nextSeq = 0;
  private lastApplied = -1;

  /** Reserve the sequence number for a request about to be sent. */
  issue(): number {
    return this.nextSeq++;
  }

  /** True (and records it) iff a response with this sequence number may be
   * applied; false means a newer response already landed. */
  accept(seq: number): boolean {
    if (seq <= this.lastApplied) return false;
    this.lastApplied = seq;
    return true;
  }
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  ms: number,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | undefined;
  return (...args: A) => {
    if (timer !== undefined) clearTimeout(timer);
    timer = setTimeout(() => fn(...args), ms);
  };
}
