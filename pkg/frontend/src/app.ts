/**
 * The architect/annotator application: lobby (join code or comparison hit)
 * -> live game (voxel views, chat, turn controls) -> completion code, and
 * for comparisons a second blinded game plus the verdict form.
 *
 * The build-zone view renders only server-acknowledged state; every turn
 * boundary cross-checks the server's grid checksum, and any sequence gap or
 * digest mismatch triggers a resync rather than silent divergence.
 */
import { ComparisonFlow, HitView } from "./comparison.js";
import { GridMap, SessionMirror } from "./mirror.js";
import {
  GameEvent,
  ServerMessage,
  TaskView,
  chatEvent,
  eventMessage,
  gameEndedEvent,
  isEnvelope,
  joinMessage,
  parseMessage,
  resyncMessage,
  turnEndedEvent,
} from "./protocol.js";
import { VoxelView, VIEW_PRESETS } from "./render.js";

export interface Transport {
  send(line: string): void;
  close(): void;
}

export type Connect = (
  onLine: (line: string) => void,
  onClose: () => void,
) => Promise<Transport>;

export type FetchJson = (
  url: string,
  init?: { method?: string; body?: unknown },
) => Promise<unknown>;

interface ChecksumCheck {
  seq: number;
  server: string;
  local: string;
  match: boolean;
}

export class App {
  readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly connect: Connect;
  private readonly fetchJson: FetchJson;
  private readonly humanId: string;

  private transport: Transport | null = null;
  mirror: SessionMirror | null = null;
  private task: TaskView | null = null;
  private builderName = "";
  private views: { target: VoxelView; build: VoxelView } | null = null;
  private resyncing = false;

  comparison: ComparisonFlow | null = null;
  private activeSlot: string | null = null;
  readonly checksumChecks: ChecksumCheck[] = [];

  constructor(
    root: HTMLElement,
    opts: { connect: Connect; fetchJson: FetchJson; humanId?: string },
  ) {
    this.root = root;
    this.doc = root.ownerDocument;
    this.connect = opts.connect;
    this.fetchJson = opts.fetchJson;
    this.humanId = opts.humanId ?? "annotator";
    this.showLobby();
  }

  // -- helpers --------------------------------------------------------------
  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Record<string, string> = {},
    text = "",
  ): HTMLElementTagNameMap[K] {
    const node = this.doc.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
    if (text) node.textContent = text;
    return node;
  }

  byId<T extends HTMLElement>(id: string): T {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
  }

  private setStatus(text: string): void {
    const status = this.root.querySelector("#status-line");
    if (status) status.textContent = text;
  }

  // -- lobby ---------------------------------------------------------------
  showLobby(error = ""): void {
    this.root.innerHTML = "";
    const lobby = this.el("div", { id: "lobby", class: "screen" });
    lobby.append(
      this.el("h1", {}, "Building games lobby"),
      this.el("p", { class: "hint" },
        "Enter the join code you were given, or a comparison id to play a blinded pair of games."),
    );
    const joinRow = this.el("div", { class: "row" });
    joinRow.append(
      this.el("input", { id: "join-code", placeholder: "join code" }),
      this.el("button", { id: "join-btn" }, "Join game"),
    );
    const hitRow = this.el("div", { class: "row" });
    hitRow.append(
      this.el("input", { id: "hit-id", placeholder: "comparison id" }),
      this.el("button", { id: "hit-btn" }, "Start comparison"),
    );
    const errorLine = this.el("p", { id: "lobby-error", class: "error" }, error);
    lobby.append(joinRow, hitRow, errorLine);
    this.root.append(lobby);

    this.byId<HTMLButtonElement>("join-btn").addEventListener("click", () => {
      const code = this.byId<HTMLInputElement>("join-code").value.trim();
      if (code) void this.joinWithCode(code);
    });
    this.byId<HTMLButtonElement>("hit-btn").addEventListener("click", () => {
      const hitId = this.byId<HTMLInputElement>("hit-id").value.trim();
      if (hitId) void this.startComparison(hitId);
    });
  }

  // -- joining -------------------------------------------------------------
  private async ensureTransport(): Promise<Transport> {
    if (this.transport === null) {
      this.transport = await this.connect(
        (line) => this.handleLine(line),
        () => this.setStatus("connection closed"),
      );
    }
    return this.transport;
  }

  async joinWithCode(code: string): Promise<void> {
    try {
      const transport = await this.ensureTransport();
      transport.send(joinMessage(code, this.humanId));
    } catch (err) {
      this.showLobby(`cannot connect: ${String(err)}`);
    }
  }

  async startComparison(hitId: string): Promise<void> {
    try {
      if (this.comparison === null || this.comparison.hit.hitId !== hitId) {
        const hit = (await this.fetchJson(`/admin/comparisons/${hitId}`)) as HitView;
        this.comparison = new ComparisonFlow(hit);
      }
      const slot = this.comparison.nextSlot();
      if (slot === null) {
        this.showVerdictForm();
        return;
      }
      this.activeSlot = slot;
      await this.joinWithCode(this.comparison.codeFor(slot));
    } catch (err) {
      this.showLobby(`comparison unavailable: ${String(err)}`);
    }
  }

  // -- message handling --------------------------------------------------------
  handleLine(line: string): void {
    let msg: ServerMessage;
    try {
      msg = parseMessage(line);
    } catch {
      return;
    }
    if (isEnvelope(msg)) {
      this.handleEnvelope(msg.sessionId, msg.seq, msg.event);
      return;
    }
    switch (msg.type) {
      case "joined":
        this.task = msg.task;
        this.builderName = msg.builderName;
        this.mirror = new SessionMirror(msg.sessionId, msg.task.initialBlocks);
        this.showGame();
        break;
      case "checksum":
        this.verifyChecksum(msg.seq, msg.value);
        break;
      case "completion_code":
        this.showCompletionCode(msg.code);
        break;
      case "resync_complete":
        this.resyncing = false;
        this.refreshGame();
        break;
      case "error":
        if (this.mirror === null) this.showLobby(`${msg.code}: ${msg.detail}`);
        else this.setStatus(`${msg.code}: ${msg.detail}`);
        break;
      default:
        break;
    }
  }

  private handleEnvelope(sessionId: string, seq: number, event: GameEvent): void {
    const mirror = this.mirror;
    if (mirror === null || mirror.sessionId !== sessionId) return;
    if (this.resyncing) {
      mirror.apply(seq, event);
      return;
    }
    if (mirror.gap(seq)) {
      this.requestResync();
      return;
    }
    mirror.apply(seq, event);
    if (event.kind === "GameEnded") this.onGameEnded();
    this.refreshGame();
  }

  private requestResync(): void {
    const mirror = this.mirror;
    if (mirror === null || this.task === null || this.transport === null) return;
    this.resyncing = true;
    this.mirror = new SessionMirror(mirror.sessionId, this.task.initialBlocks);
    this.transport.send(resyncMessage(mirror.sessionId));
  }

  private verifyChecksum(seq: number, serverValue: string): void {
    if (this.mirror === null) return;
    const local = this.mirror.grid.checksum();
    const match = local === serverValue;
    this.checksumChecks.push({ seq, server: serverValue, local, match });
    if (!match) this.requestResync();
  }

  private onGameEnded(): void {
    if (this.comparison !== null && this.activeSlot !== null) {
      this.comparison.markEnded(this.activeSlot);
    }
  }

  // -- game screen ------------------------------------------------------------
  private showGame(): void {
    if (this.task === null || this.mirror === null) return;
    this.root.innerHTML = "";
    const game = this.el("div", { id: "game", class: "screen" });

    const header = this.el("div", { class: "row header" });
    header.append(
      this.el("span", { id: "builder-name" }, `builder: ${this.builderName}`),
      this.el("span", { id: "turn-indicator" }),
      this.el("span", { id: "status-line" }),
    );
    game.append(header);

    const boards = this.el("div", { class: "boards" });
    const targetBox = this.el("div", { class: "board" });
    targetBox.append(this.el("h2", {}, "Target structure"));
    const targetCanvas = this.el("canvas", {
      id: "target-canvas", width: "360", height: "300",
    });
    targetBox.append(targetCanvas);
    const buildBox = this.el("div", { class: "board" });
    buildBox.append(this.el("h2", {}, "Build zone"));
    const buildCanvas = this.el("canvas", {
      id: "build-canvas", width: "360", height: "300",
    });
    buildBox.append(buildCanvas);
    boards.append(targetBox, buildBox);
    game.append(boards);

    const presets = this.el("div", { class: "row presets" });
    for (const name of Object.keys(VIEW_PRESETS)) {
      const button = this.el("button", { class: "preset", "data-view": name }, name);
      button.addEventListener("click", () => {
        this.views?.target.setPreset(name);
        this.views?.build.setPreset(name);
      });
      presets.append(button);
    }
    game.append(presets);

    const chatPane = this.el("div", { id: "chat-pane" });
    chatPane.append(this.el("ul", { id: "chat-log" }));
    const chatRow = this.el("div", { class: "row" });
    chatRow.append(
      this.el("input", { id: "chat-input", placeholder: "instruction for the builder" }),
      this.el("button", { id: "send-btn" }, "Send"),
    );
    chatPane.append(chatRow);
    game.append(chatPane);

    const controls = this.el("div", { class: "row controls" });
    controls.append(
      this.el("button", { id: "end-turn-btn" }, "End turn"),
      this.el("button", { id: "end-success-btn" }, "End game: built!"),
      this.el("button", { id: "end-fail-btn" }, "End game: give up"),
    );
    game.append(controls);

    const modal = this.el("div", { id: "completion-modal", class: "modal hidden" });
    modal.append(
      this.el("h2", {}, "Game over"),
      this.el("p", {}, "Your completion code:"),
      this.el("code", { id: "completion-code" }),
      this.el("p", { id: "next-step" }),
    );
    game.append(modal);
    this.root.append(game);

    const target = new VoxelView(this.byId<HTMLCanvasElement>("target-canvas"));
    const build = new VoxelView(this.byId<HTMLCanvasElement>("build-canvas"));
    this.views = { target, build };
    target.show(GridMap.fromBlocks(this.task.targetBlocks));
    build.show(this.mirror.grid);

    this.byId<HTMLButtonElement>("send-btn").addEventListener("click", () => {
      const input = this.byId<HTMLInputElement>("chat-input");
      const text = input.value.trim();
      if (text) {
        this.sendEvent(chatEvent("architect", text));
        input.value = "";
      }
    });
    this.byId<HTMLButtonElement>("end-turn-btn").addEventListener("click", () =>
      this.sendEvent(turnEndedEvent("architect")),
    );
    this.byId<HTMLButtonElement>("end-success-btn").addEventListener("click", () =>
      this.sendEvent(gameEndedEvent(true)),
    );
    this.byId<HTMLButtonElement>("end-fail-btn").addEventListener("click", () =>
      this.sendEvent(gameEndedEvent(false)),
    );
    this.refreshGame();
  }

  sendEvent(event: GameEvent): void {
    if (this.transport === null || this.mirror === null) return;
    this.transport.send(eventMessage(this.mirror.sessionId, event));
  }

  private refreshGame(): void {
    const mirror = this.mirror;
    if (mirror === null || this.root.querySelector("#game") === null) return;
    const indicator = this.root.querySelector("#turn-indicator");
    if (indicator) {
      indicator.textContent =
        mirror.phase === "ArchitectTurn"
          ? "your turn: instruct the builder"
          : mirror.phase === "BuilderTurn"
            ? "builder is working..."
            : "game over";
    }
    const myTurn = mirror.phase === "ArchitectTurn";
    for (const id of ["send-btn", "end-turn-btn", "end-success-btn", "end-fail-btn",
                      "chat-input"]) {
      const node = this.root.querySelector(`#${id}`) as
        | HTMLButtonElement
        | HTMLInputElement
        | null;
      if (node) node.disabled = !myTurn;
    }
    const logNode = this.root.querySelector("#chat-log");
    if (logNode) {
      logNode.innerHTML = "";
      for (const line of mirror.chat) {
        const item = this.el("li", { class: `chat-${line.role}` });
        const who = line.role === "architect" ? "you" : this.builderName;
        item.textContent = `${who}: ${line.text}`;
        logNode.append(item);
      }
    }
    this.views?.build.show(mirror.grid);
  }

  private showCompletionCode(code: string): void {
    const modal = this.root.querySelector("#completion-modal");
    if (!modal) return;
    modal.classList.remove("hidden");
    const codeNode = this.root.querySelector("#completion-code");
    if (codeNode) codeNode.textContent = code;
    const next = this.root.querySelector("#next-step") as HTMLElement | null;
    if (!next) return;
    next.innerHTML = "";
    if (this.comparison === null) return;
    if (this.comparison.bothEnded) {
      const button = this.el("button", { id: "to-verdict-btn" }, "Give your verdict");
      button.addEventListener("click", () => this.showVerdictForm());
      next.append(button);
    } else {
      const slot = this.comparison.nextSlot();
      const button = this.el("button", { id: "next-game-btn" },
        `Play the second game (${slot})`);
      button.addEventListener("click", () => {
        if (slot !== null && this.comparison !== null) {
          this.activeSlot = slot;
          void this.joinWithCode(this.comparison.codeFor(slot));
        }
      });
      next.append(button);
    }
  }

  // -- verdict -------------------------------------------------------------
  showVerdictForm(): void {
    const comparison = this.comparison;
    if (comparison === null) return;
    this.root.innerHTML = "";
    const form = this.el("div", { id: "verdict-form", class: "screen" });
    form.append(
      this.el("h1", {}, "Which agent was better?"),
      this.el("p", { class: "hint" },
        "You played the same task twice, once with each agent."),
    );
    for (const slot of comparison.slots) {
      const row = this.el("div", { class: "row" });
      const radio = this.el("input", {
        type: "radio", name: "winner", id: `winner-${slot.replace(/\s+/g, "-")}`,
        value: slot,
      });
      row.append(radio, this.el("label", {}, slot));
      const feedback = this.el("textarea", {
        id: `feedback-${slot.replace(/\s+/g, "-")}`,
        placeholder: `feedback on ${slot}`,
      });
      row.append(feedback);
      form.append(row);
    }
    const submit = this.el("button", { id: "verdict-submit" }, "Submit verdict");
    submit.disabled = !comparison.verdictAllowed;
    submit.addEventListener("click", () => void this.submitVerdict());
    form.append(submit, this.el("p", { id: "verdict-status" }));
    this.root.append(form);
  }

  async submitVerdict(): Promise<void> {
    const comparison = this.comparison;
    if (comparison === null || !comparison.verdictAllowed) return;
    const chosen = this.root.querySelector(
      "input[name=winner]:checked",
    ) as HTMLInputElement | null;
    if (chosen === null) {
      this.byId("verdict-status").textContent = "pick a winner first";
      return;
    }
    const feedback: Record<string, string> = {};
    for (const slot of comparison.slots) {
      const node = this.root.querySelector(
        `#feedback-${slot.replace(/\s+/g, "-")}`,
      ) as HTMLTextAreaElement | null;
      if (node && node.value.trim()) feedback[slot] = node.value.trim();
    }
    comparison.chooseWinner(chosen.value, feedback);
    await this.fetchJson(`/admin/comparisons/${comparison.hit.hitId}/verdict`, {
      method: "POST",
      body: comparison.verdictPayload(),
    });
    this.byId("verdict-status").textContent = "verdict recorded, thank you!";
  }
}
