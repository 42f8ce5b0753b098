// UI conformance against a fully mocked API: round-trip rendering, the
// restart flow's visit counts, and the pending input gate.

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatController } from "../src/model.js";
import { renderComposer, renderMessages, renderStatePanel } from "../src/render.js";
import {
  EDGES,
  firstPassDelta,
  jsonResponse,
  resetSeq,
  restartPassDelta,
  scriptedFetch,
} from "./helpers.js";

beforeEach(resetSeq);

describe("UI conformance", () => {
  it("renders both sides of a send/reply round-trip", async () => {
    const { fetch } = scriptedFetch([
      { method: "POST", path: "/sessions", respond: () => jsonResponse(201, { session_id: "s1" }) },
      {
        method: "POST",
        path: "/sessions/s1/messages",
        respond: () =>
          jsonResponse(200, {
            reply: "A vibratory bowl feeder conveys parts up a spiral track.",
            phase: "Done",
            trace_delta: [],
          }),
      },
    ]);
    const controller = new ChatController(new ApiClient("http://server", fetch));
    await controller.send("What is a vibratory bowl feeder?");
    const html = renderMessages(controller.vm.messages);
    expect(html).toContain("What is a vibratory bowl feeder?");
    expect(html).toContain("A vibratory bowl feeder conveys parts up a spiral track.");
    expect(controller.vm.messages).toHaveLength(2);
  });

  it("shows DeterminingOperation visited twice after a scripted restart flow", async () => {
    let firstTurn = true;
    const { fetch } = scriptedFetch([
      { method: "POST", path: "/sessions", respond: () => jsonResponse(201, { session_id: "s1" }) },
      {
        method: "POST",
        path: "/sessions/s1/messages",
        respond: () => {
          if (firstTurn) {
            firstTurn = false;
            return jsonResponse(200, {
              reply: "Could you clarify the payload?",
              phase: "AwaitingClarification",
              trace_delta: firstPassDelta(),
            });
          }
          return jsonResponse(200, {
            reply: "Brand: Epson Type: Articulated Arm Robot Model: C8-A1401 (C8XL)",
            phase: "Done",
            trace_delta: restartPassDelta(),
          });
        },
      },
    ]);
    const controller = new ChatController(new ApiClient("http://server", fetch));
    await controller.send("I need a robot for housings");
    expect(controller.vm.phase).toBe("AwaitingClarification");
    expect(controller.vm.awaitingClarification).toBe(true);
    await controller.send("payload is 5 kg");
    expect(controller.vm.phase).toBe("Done");
    const panel = renderStatePanel(EDGES, controller.vm);
    expect(panel).toContain('data-phase="DeterminingOperation" data-count="2"');
  });

  it("disables the input while a turn is pending", async () => {
    let release: (r: Response) => void = () => {};
    const blocked = new Promise<Response>((resolve) => (release = resolve));
    const { fetch } = scriptedFetch([
      { method: "POST", path: "/sessions", respond: () => jsonResponse(201, { session_id: "s1" }) },
      { method: "POST", path: "/sessions/s1/messages", respond: () => blocked },
    ]);
    const controller = new ChatController(new ApiClient("http://server", fetch));
    const inFlight = controller.send("slow question");
    await Promise.resolve();
    expect(controller.vm.pending).toBe(true);
    expect(renderComposer(controller.vm)).toContain("disabled");
    release(jsonResponse(200, { reply: "ok", phase: "Done", trace_delta: [] }));
    await inFlight;
    expect(controller.vm.pending).toBe(false);
    expect(renderComposer(controller.vm)).not.toContain("disabled");
  });
});
