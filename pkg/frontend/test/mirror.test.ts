import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";

import { GridMap, SessionMirror } from "../src/mirror.js";
import type { GameEvent } from "../src/protocol.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixture = JSON.parse(
  readFileSync(join(here, "fixtures", "session_transcript.json"), "utf8"),
);

describe("GridMap checksum", () => {
  // reference digests computed by the server implementation
  it("matches the server digest for known grids", () => {
    expect(new GridMap().checksum()).toBe("cbf29ce484222325");
    expect(GridMap.fromBlocks([[1, 63, 0, 50]]).checksum()).toBe("49ba43e595488403");
    expect(GridMap.fromBlocks([[-2, 63, 1, 50], [1, 65, 0, 57]]).checksum()).toBe(
      "5281f35bdce48ceb",
    );
  });

  it("is order-independent", () => {
    const a = GridMap.fromBlocks([[0, 63, 0, 50], [1, 63, 0, 57]]);
    const b = GridMap.fromBlocks([[1, 63, 0, 57], [0, 63, 0, 50]]);
    expect(a.checksum()).toBe(b.checksum());
  });

  it("converts world-frame blocks on load", () => {
    const grid = GridMap.fromBlocks([[2, 63, -1, 52]]);
    expect(grid.entries()).toEqual([[2, 0, -1, 52]]);
  });
});

describe("SessionMirror", () => {
  const place = (x: number, y: number, z: number, id: number): GameEvent => ({
    kind: "BlockPlaced",
    coord: [x, y, z],
    blockId: id,
  });

  it("applies placements and removals", () => {
    const mirror = new SessionMirror("s", []);
    mirror.apply(1, place(0, 0, 0, 50));
    mirror.apply(2, { kind: "BlockRemoved", coord: [0, 0, 0] });
    expect(mirror.grid.size).toBe(0);
    expect(mirror.lastSeq).toBe(2);
  });

  it("tracks phases and chat", () => {
    const mirror = new SessionMirror("s", []);
    mirror.apply(1, { kind: "ChatMessage", role: "architect", text: "hello builder" });
    mirror.apply(2, { kind: "TurnEnded", role: "architect" });
    expect(mirror.phase).toBe("BuilderTurn");
    mirror.apply(3, { kind: "TurnEnded", role: "builder" });
    expect(mirror.phase).toBe("ArchitectTurn");
    expect(mirror.turnIndex).toBe(1);
    mirror.apply(4, { kind: "GameEnded", success: false, reporter: "architect" });
    expect(mirror.phase).toBe("Ended");
    expect(mirror.success).toBe(false);
    expect(mirror.chat).toEqual([{ role: "architect", text: "hello builder" }]);
  });

  it("detects sequence gaps", () => {
    const mirror = new SessionMirror("s", []);
    expect(mirror.gap(1)).toBe(false);
    mirror.apply(1, place(0, 0, 0, 50));
    expect(mirror.gap(3)).toBe(true);
    expect(mirror.gap(2)).toBe(false);
  });

  it("reproduces the server checksum at every turn boundary of the captured session", () => {
    const joined = fixture.messages.find((m: any) => m.type === "joined");
    const mirror = new SessionMirror(joined.sessionId, joined.task.initialBlocks);
    const checks: Array<{ seq: number; ok: boolean }> = [];
    for (const message of fixture.messages) {
      if ("event" in message) {
        mirror.apply(message.seq, message.event as GameEvent);
      } else if (message.type === "checksum") {
        checks.push({ seq: message.seq, ok: mirror.grid.checksum() === message.value });
      }
    }
    expect(checks.length).toBeGreaterThanOrEqual(4);
    expect(checks.every((c) => c.ok)).toBe(true);
    expect(mirror.grid.checksum()).toBe(fixture.finalChecksum);
    expect(mirror.grid.entries().length).toBe(fixture.finalBlocks.length);
  });
});
