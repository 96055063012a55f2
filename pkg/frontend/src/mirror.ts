/**
 * Client-side session state, fed exclusively by acknowledged server
 * envelopes: the rendered build zone never diverges optimistically. The
 * checksum digest matches the server's (FNV-1a 64-bit over the sorted cell
 * list), verified at every turn boundary.
 */
import type { BlockQuad, GameEvent, Role } from "./protocol.js";

export const GROUND_Y = 63; // world-frame y of the ground layer in datasets

export type Phase = "ArchitectTurn" | "BuilderTurn" | "Ended";

export interface ChatLine {
  role: Role;
  text: string;
}

const keyOf = (x: number, y: number, z: number) => `${x},${y},${z}`;

export class GridMap {
  private cells = new Map<string, number>();

  static fromBlocks(blocks: BlockQuad[], worldFrame = true): GridMap {
    const grid = new GridMap();
    for (const [x, y, z, id] of blocks) {
      grid.set(x, worldFrame ? y - GROUND_Y : y, z, id);
    }
    return grid;
  }

  set(x: number, y: number, z: number, blockId: number): void {
    if (blockId === 0) this.cells.delete(keyOf(x, y, z));
    else this.cells.set(keyOf(x, y, z), blockId);
  }

  remove(x: number, y: number, z: number): void {
    this.cells.delete(keyOf(x, y, z));
  }

  get size(): number {
    return this.cells.size;
  }

  entries(): Array<[number, number, number, number]> {
    const out: Array<[number, number, number, number]> = [];
    for (const [key, id] of this.cells) {
      const [x, y, z] = key.split(",").map(Number);
      out.push([x, y, z, id]);
    }
    out.sort((a, b) => a[0] - b[0] || a[1] - b[1] || a[2] - b[2]);
    return out;
  }

  /** FNV-1a 64-bit over "x,y,z,id," per sorted cell; hex, zero-padded. */
  checksum(): string {
    let h = 0xcbf29ce484222325n;
    const prime = 0x100000001b3n;
    const mask = 0xffffffffffffffffn;
    for (const [x, y, z, id] of this.entries()) {
      const text = `${x},${y},${z},${id},`;
      for (let i = 0; i < text.length; i++) {
        h ^= BigInt(text.charCodeAt(i));
        h = (h * prime) & mask;
      }
    }
    return h.toString(16).padStart(16, "0");
  }
}

export class SessionMirror {
  readonly sessionId: string;
  readonly grid: GridMap;
  readonly chat: ChatLine[] = [];
  phase: Phase = "ArchitectTurn";
  lastSeq = 0;
  turnIndex = 0;
  success: boolean | null = null;

  constructor(sessionId: string, initialBlocks: BlockQuad[]) {
    this.sessionId = sessionId;
    this.grid = GridMap.fromBlocks(initialBlocks);
  }

  /** True when this seq does not directly follow the last applied one. */
  gap(seq: number): boolean {
    return seq !== this.lastSeq + 1;
  }

  apply(seq: number, event: GameEvent): void {
    this.lastSeq = seq;
    switch (event.kind) {
      case "ChatMessage":
        this.chat.push({ role: event.role, text: event.text });
        break;
      case "BlockPlaced": {
        const [x, y, z] = event.coord;
        this.grid.set(x, y, z, event.blockId);
        break;
      }
      case "BlockRemoved": {
        const [x, y, z] = event.coord;
        this.grid.remove(x, y, z);
        break;
      }
      case "TurnEnded":
        if (event.role === "architect") {
          this.phase = "BuilderTurn";
        } else {
          this.phase = "ArchitectTurn";
          this.turnIndex += 1;
        }
        break;
      case "GameEnded":
        this.phase = "Ended";
        this.success = event.success;
        break;
      default:
        break; // PlayerJoined / PlayerMove leave the grid untouched
    }
  }
}
