// Browser entry point. Configuration comes from the URL:
//   index.html?server=ws://localhost:8080/ws&name=Ana

import { LiveSessionClient } from "./client.js";
import { ClientViewState, NotConnected } from "./reducer.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(view: ClientViewState): void {
  const subtitle = el<HTMLDivElement>("subtitle");
  subtitle.textContent = view.currentSubtitle ?? "Waiting for the moderator…";
  subtitle.classList.toggle("active", view.currentSubtitle !== null);

  el<HTMLDivElement>("stage").textContent = view.stage
    ? `Stage ${view.stage.index + 1}: ${view.stage.title}`
    : "";
  el<HTMLDivElement>("status").textContent = view.connection;
  el<HTMLUListElement>("roster").replaceChildren(
    ...view.roster.map((name) => {
      const item = document.createElement("li");
      item.textContent = name;
      return item;
    }),
  );

  const feed = el<HTMLDivElement>("feed");
  feed.replaceChildren(
    ...view.feed.map((message) => {
      const row = document.createElement("div");
      row.className = `message ${message.from}`;
      const who = document.createElement("strong");
      who.textContent = `${message.name}: `;
      row.append(who, document.createTextNode(message.text));
      return row;
    }),
  );
  feed.scrollTop = feed.scrollHeight;
}

function start(): void {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? `ws://${window.location.host}/ws`;
  const name = params.get("name") ?? "Guest";

  const client = new LiveSessionClient(server, name, render);
  client.connect();

  const input = el<HTMLInputElement>("input");
  const send = () => {
    try {
      if (client.send(input.value)) {
        input.value = ""; // cleared only on successful send
      }
    } catch (error) {
      if (error instanceof NotConnected) {
        el<HTMLDivElement>("status").textContent = "disconnected — message kept";
      } else {
        throw error;
      }
    }
  };
  el<HTMLButtonElement>("send").addEventListener("click", send);
  input.addEventListener("keydown", (key) => {
    if (key.key === "Enter") send();
  });
  el<HTMLButtonElement>("reconnect").addEventListener("click", () => client.reconnect());
}

start();
