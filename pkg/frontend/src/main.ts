/** Wires the login view, topology canvas, intent dropdown, and create form. */

import { ApiClient } from "./api.js";
import { buildScene, renderScene } from "./render.js";
import { ViewStore } from "./state.js";

const api = new ApiClient("");
const store = new ViewStore(api, 2000);

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing element #${id}`);
  return found as T;
}

function renderAll(): void {
  const state = store.state;
  el("login-view").style.display = state.auth ? "none" : "block";
  el("app-view").style.display = state.auth ? "block" : "none";

  const banner = el("error-banner");
  banner.textContent = state.error ?? "";
  banner.style.display = state.error ? "block" : "none";

  if (!state.auth || state.topology === null) return;

  const svg = el<HTMLElement>("graph") as unknown as SVGSVGElement;
  const scene = buildScene(state.topology, state.highlight, 760, 520);
  renderScene(svg, scene);

  const actives = state.intents.filter((r) => r.state === "ACTIVE");
  const dropdown = el<HTMLSelectElement>("intent-select");
  const previous = state.selectedIntent ?? "";
  dropdown.innerHTML = "";
  const none = document.createElement("option");
  none.value = "";
  none.textContent = "none";
  dropdown.appendChild(none);
  for (const record of actives) {
    const option = document.createElement("option");
    option.value = record.id;
    option.textContent = `${record.intent_type}: ${record.from_city} -> ${record.to_city}`;
    dropdown.appendChild(option);
  }
  dropdown.value = previous;

  const cities = state.topology.nodes.filter((n) => n.kind === "endpoint").map((n) => n.id);
  for (const selectId of ["from-city", "to-city"]) {
    const select = el<HTMLSelectElement>(selectId);
    const chosen = select.value;
    select.innerHTML = "";
    for (const city of cities) {
      const option = document.createElement("option");
      option.value = city;
      option.textContent = city;
      select.appendChild(option);
    }
    if (cities.includes(chosen)) select.value = chosen;
  }
  if (selectedSame()) el<HTMLButtonElement>("create-button").disabled = true;
  else el<HTMLButtonElement>("create-button").disabled = false;

  const withdraw = el<HTMLButtonElement>("withdraw-button");
  withdraw.disabled = state.selectedIntent === null;
}

function selectedSame(): boolean {
  return el<HTMLSelectElement>("from-city").value === el<HTMLSelectElement>("to-city").value;
}

function wire(): void {
  store.subscribe(renderAll);

  el<HTMLFormElement>("login-form").addEventListener("submit", async (event) => {
    event.preventDefault();
    const username = el<HTMLInputElement>("username").value;
    const password = el<HTMLInputElement>("password").value;
    const second = el<HTMLInputElement>("second-factor").value;
    const ok = await store.login(username, password, second || undefined);
    if (ok) store.startPolling();
  });

  el<HTMLSelectElement>("intent-select").addEventListener("change", (event) => {
    const value = (event.target as HTMLSelectElement).value;
    void store.selectIntent(value === "" ? null : value);
  });

  el<HTMLFormElement>("intent-form").addEventListener("submit", (event) => {
    event.preventDefault();
    if (selectedSame()) return; // identical from/to is disabled client-side
    const type = el<HTMLSelectElement>("intent-type").value;
    const from = el<HTMLSelectElement>("from-city").value;
    const to = el<HTMLSelectElement>("to-city").value;
    const demand = Number(el<HTMLInputElement>("demand").value || "0");
    void store.createIntent(type, from, to, demand);
  });

  for (const selectId of ["from-city", "to-city"]) {
    el<HTMLSelectElement>(selectId).addEventListener("change", () => {
      el<HTMLButtonElement>("create-button").disabled = selectedSame();
    });
  }

  el<HTMLButtonElement>("withdraw-button").addEventListener("click", () => {
    const selected = store.state.selectedIntent;
    if (selected !== null) void store.withdrawIntent(selected);
  });

  renderAll();
}

wire();
