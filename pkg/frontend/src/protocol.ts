/**
 * Wire protocol: newline-delimited JSON messages, one per WebSocket text
 * frame. Game events ride in {sessionId, seq, event} envelopes with gapless
 * per-session sequence numbers.
 */

export type Role = "architect" | "builder";

export type GameEvent =
  | { kind: "PlayerJoined"; role: Role }
  | { kind: "ChatMessage"; role: Role; text: string }
  | { kind: "PlayerMove"; pos: [number, number, number]; pitch: number; yaw: number }
  | { kind: "BlockPlaced"; coord: [number, number, number]; blockId: number }
  | { kind: "BlockRemoved"; coord: [number, number, number] }
  | { kind: "TurnEnded"; role: Role }
  | { kind: "GameEnded"; success: boolean; reporter: Role };

export type BlockQuad = [number, number, number, number];

export interface TaskView {
  id: string;
  initialBlocks: BlockQuad[];
  targetBlocks: BlockQuad[];
}

export type ServerMessage =
  | { type: "joined"; sessionId: string; role: Role; task: TaskView; builderName: string; stepBudget: number }
  | { type: "accepted"; sessionId: string; seqs: number[] }
  | { type: "checksum"; sessionId: string; seq: number; value: string }
  | { type: "completion_code"; sessionId: string; code: string }
  | { type: "resync_complete"; sessionId: string }
  | { type: "error"; code: string; detail: string; sessionId?: string }
  | { type: "heartbeat" }
  | { sessionId: string; seq: number; event: GameEvent };

export function parseMessage(line: string): ServerMessage {
  const msg = JSON.parse(line);
  if (typeof msg !== "object" || msg === null) {
    throw new Error(`not a protocol message: ${line}`);
  }
  if ("type" in msg) return msg as ServerMessage;
  if ("seq" in msg && "event" in msg) return msg as ServerMessage;
  throw new Error(`unrecognized message shape: ${line}`);
}

export function isEnvelope(
  msg: ServerMessage,
): msg is { sessionId: string; seq: number; event: GameEvent } {
  return !("type" in msg) && "seq" in msg && "event" in msg;
}

export const EVENT_KINDS = [
  "PlayerJoined",
  "ChatMessage",
  "PlayerMove",
  "BlockPlaced",
  "BlockRemoved",
  "TurnEnded",
  "GameEnded",
] as const;

export function assertKnownEvent(event: GameEvent): GameEvent {
  if (!EVENT_KINDS.includes(event.kind)) {
    throw new Error(`unknown event kind ${(event as { kind: string }).kind}`);
  }
  return event;
}

export function joinMessage(code: string, humanId: string): string {
  return JSON.stringify({ type: "join", code, humanId });
}

export function eventMessage(sessionId: string, event: GameEvent): string {
  return JSON.stringify({ type: "event", sessionId, event });
}

export function resyncMessage(sessionId: string, fromSeq = 0): string {
  return JSON.stringify({ type: "resync", sessionId, fromSeq });
}

export function chatEvent(role: Role, text: string): GameEvent {
  return { kind: "ChatMessage", role, text };
}

export function turnEndedEvent(role: Role): GameEvent {
  return { kind: "TurnEnded", role };
}

export function gameEndedEvent(success: boolean): GameEvent {
  return { kind: "GameEnded", success, reporter: "architect" };
}
