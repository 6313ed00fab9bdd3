import { describe, expect, it } from "vitest";
import { ApiError, PortalApi } from "../src/api";

interface Call {
  url: string;
  method: string;
  headers: Record<string, string>;
  body: BodyInit | undefined;
}

function makeClient(respond: (call: Call) => Response, token: string | null = null) {
  const calls: Call[] = [];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const call: Call = {
      url: String(input),
      method: init?.method ?? "GET",
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body ?? undefined,
    };
    calls.push(call);
    return respond(call);
  }) as typeof fetch;
  return { api: new PortalApi("http://portal.test/", token, fetchFn), calls };
}

const json = (status: number, body: unknown) =>
  new Response(JSON.stringify(body), { status, headers: { "Content-Type": "application/json" } });

describe("PortalApi request shaping", () => {
  it("strips the trailing slash from the base and encodes path ids", async () => {
    const { api, calls } = makeClient(() => json(200, { id: "a b" }));
    await api.getResource("a b");
    expect(calls[0].url).toBe("http://portal.test/api/resources/a%20b");
  });

  it("sends a bearer token when configured and none otherwise", async () => {
    const anonymous = makeClient(() => json(200, {}));
    await anonymous.api.getTestbed();
    expect(anonymous.calls[0].headers).not.toHaveProperty("Authorization");

    const authed = makeClient(() => json(200, { name: "x" }), "s3cret");
    await authed.api.rename("x");
    expect(authed.calls[0].headers.Authorization).toBe("Bearer s3cret");
  });

  it("posts JSON bodies with an explicit content type", async () => {
    const { api, calls } = makeClient(() => json(200, { version: 1, rows: [] }));
    await api.query("(status=up)", ["cpu-count"]);
    expect(calls[0].method).toBe("POST");
    expect(calls[0].headers["Content-Type"]).toBe("application/json");
    expect(JSON.parse(calls[0].body as string)).toEqual({
      filter: "(status=up)",
      projection: ["cpu-count"],
    });
  });

  it("sends uploads as multipart form data, letting fetch pick the boundary", async () => {
    const { api, calls } = makeClient(() => json(200, { path: "logo.png" }));
    const file = new File([new Uint8Array([1, 2, 3])], "logo.png", { type: "image/png" });
    await api.uploadAsset("logo", file);
    expect(calls[0].url).toBe("http://portal.test/api/testbed/logo");
    expect(calls[0].method).toBe("PUT");
    expect(calls[0].body).toBeInstanceOf(FormData);
    expect(calls[0].headers).not.toHaveProperty("Content-Type");
    expect((calls[0].body as FormData).get("file")).toBeInstanceOf(File);
  });
});

describe("PortalApi error handling", () => {
  it("turns shaped error bodies into ApiError with code and offset", async () => {
    const { api } = makeClient(() =>
      json(400, { code: "bad_filter", message: "expected ')'", offset: 9 }),
    );
    const err = await api.query("(a=1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.code).toBe("bad_filter");
    expect(err.offset).toBe(9);
    expect(err.message).toBe("expected ')'");
  });

  it("collects validation problem lists", async () => {
    const { api } = makeClient(() =>
      json(400, { code: "validation", message: "bad pin", problems: ["port out of range"] }),
    );
    const err = await api.addResource({ port: 99999 }).catch((e) => e);
    expect(err.code).toBe("validation");
    expect(err.problems).toEqual(["port out of range"]);
  });

  it("degrades gracefully when the error body is not JSON", async () => {
    const { api } = makeClient(() => new Response("<html>boom</html>", { status: 502 }));
    const err = await api.getResources().catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(502);
    expect(err.code).toBe("unknown");
    expect(err.message).toBe("HTTP 502");
    expect(err.offset).toBeNull();
  });
});

describe("PortalApi.verifyToken", () => {
  it("accepts on success, rejects on auth failures, and rethrows real errors", async () => {
    const ok = makeClient(() => json(200, { name: "Alpha" }), "good");
    await expect(ok.api.verifyToken("Alpha")).resolves.toBe(true);

    const unauthorized = makeClient(() => json(401, { code: "unauthorized", message: "no" }), "bad");
    await expect(unauthorized.api.verifyToken("Alpha")).resolves.toBe(false);

    const disabled = makeClient(() => json(403, { code: "admin_disabled", message: "no" }));
    await expect(disabled.api.verifyToken("Alpha")).resolves.toBe(false);

    const broken = makeClient(() => json(500, { code: "io_error", message: "disk" }), "good");
    await expect(broken.api.verifyToken("Alpha")).rejects.toThrow("disk");
  });

  it("probes by renaming the testbed to its current name", async () => {
    const { api, calls } = makeClient(() => json(200, { name: "Alpha" }), "good");
    await api.verifyToken("Alpha");
    expect(calls[0].method).toBe("PUT");
    expect(calls[0].url).toBe("http://portal.test/api/testbed");
    expect(JSON.parse(calls[0].body as string)).toEqual({ name: "Alpha" });
  });
});
