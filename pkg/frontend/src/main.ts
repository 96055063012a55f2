/** Browser bootstrap: WebSocket transport + same-origin admin fetches. */
import { App, Connect, FetchJson } from "./app.js";

const connect: Connect = (onLine, onClose) =>
  new Promise((resolve, reject) => {
    const scheme = location.protocol === "https:" ? "wss" : "ws";
    const socket = new WebSocket(`${scheme}://${location.host}/ws`);
    socket.onopen = () =>
      resolve({
        send: (line: string) => socket.send(line),
        close: () => socket.close(),
      });
    socket.onerror = (err) => reject(err);
    socket.onmessage = (frame) => {
      for (const line of String(frame.data).split("\n")) {
        if (line.trim()) onLine(line);
      }
    };
    socket.onclose = () => onClose();
  });

const fetchJson: FetchJson = async (url, init) => {
  const reply = await fetch(url, {
    method: init?.method ?? "GET",
    headers: { "content-type": "application/json" },
    body: init?.body === undefined ? undefined : JSON.stringify(init.body),
  });
  if (!reply.ok) throw new Error(`${url}: HTTP ${reply.status}`);
  return reply.json();
};

const root = document.getElementById("app");
if (root) new App(root, { connect, fetchJson });
