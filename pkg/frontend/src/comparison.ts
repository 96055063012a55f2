/**
 * Blinded A/B comparison flow: two games on the identical task against
 * anonymized slots, then a verdict. The verdict form stays locked until
 * both games carry a GameEnded.
 */

export interface HitView {
  hitId: string;
  taskId: string;
  slots: string[]; // always the anonymized labels, e.g. "Agent 1"/"Agent 2"
  joinCodes: Record<string, string>;
}

export class ComparisonFlow {
  readonly hit: HitView;
  private ended = new Set<string>();
  verdict: string | null = null;
  feedback: Record<string, string> = {};

  constructor(hit: HitView) {
    this.hit = hit;
  }

  get slots(): string[] {
    return [...this.hit.slots];
  }

  /** Next slot that still needs its game played, in fixed slot order. */
  nextSlot(): string | null {
    for (const slot of this.hit.slots) {
      if (!this.ended.has(slot)) return slot;
    }
    return null;
  }

  codeFor(slot: string): string {
    const code = this.hit.joinCodes[slot];
    if (!code) throw new Error(`no join code for ${slot}`);
    return code;
  }

  markEnded(slot: string): void {
    if (!this.hit.slots.includes(slot)) throw new Error(`unknown slot ${slot}`);
    this.ended.add(slot);
  }

  get bothEnded(): boolean {
    return this.hit.slots.every((slot) => this.ended.has(slot));
  }

  get verdictAllowed(): boolean {
    return this.bothEnded;
  }

  chooseWinner(slot: string, feedback: Record<string, string> = {}): void {
    if (!this.verdictAllowed) {
      throw new Error("verdict locked until both games have ended");
    }
    if (!this.hit.slots.includes(slot)) throw new Error(`unknown slot ${slot}`);
    this.verdict = slot;
    this.feedback = feedback;
  }

  verdictPayload(): { winner: string; feedback: Record<string, string> } {
    if (this.verdict === null) throw new Error("no verdict chosen");
    return { winner: this.verdict, feedback: this.feedback };
  }
}
