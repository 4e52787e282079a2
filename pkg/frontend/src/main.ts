/** Browser entry point: wire client, session, renderer and a poll loop. */

import { WorkbenchClient } from "./api.js";
import { mount } from "./dom.js";
import { render, type Handlers } from "./render.js";
import { ActorSession } from "./viewmodel.js";

const POLL_MS = 1500;

async function boot(): Promise<void> {
  const app = document.getElementById("app");
  if (app === null) throw new Error("missing #app container");

  const client = new WorkbenchClient("");
  const params = new URLSearchParams(window.location.search);
  let actor = params.get("actor");
  if (actor === null) {
    const spec = await client.spec();
    actor = spec.initiator;
  }

  const session = new ActorSession(client, actor);
  const handlers: Handlers = {
    switchActor: (next) => {
      const url = new URL(window.location.href);
      url.searchParams.set("actor", next);
      window.location.assign(url.toString());
    },
    createCase: () => void session.createCase(),
    openCase: (caseId) => void session.openCase(caseId),
    develop: (addr, production) => void session.develop(addr, production),
    commit: () => void session.commit(),
    chooseGuide: (index) => void session.chooseGuide(index),
    cancelGuides: () => session.cancelGuides(),
    ack: () => void session.ack(),
    discard: () => void session.discardEdits(),
  };

  session.subscribe((state) => mount(render(state, handlers), app));
  await session.init();
  window.setInterval(() => {
    if (!session.state.busy && session.state.guides === null) {
      void session.refresh();
    }
  }, POLL_MS);
}

void boot();
