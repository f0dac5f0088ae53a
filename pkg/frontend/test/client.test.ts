import assert from "node:assert/strict";
import { test } from "node:test";

import { PipelineClient, SocketLike } from "../src/client.js";

class FakeSocket implements SocketLike {
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;
  sent: string[] = [];
  readyState = 0;

  open(): void {
    this.readyState = 1;
    this.onopen?.();
  }

  emit(data: string): void {
    this.onmessage?.({ data });
  }

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.readyState = 3;
    this.onclose?.();
  }
}

function wait(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

test("delivers text frames and connection status", () => {
  const socks: FakeSocket[] = [];
  const client = new PipelineClient("ws://x/ws", () => {
    const s = new FakeSocket();
    socks.push(s);
    return s;
  }, 5);
  const got: string[] = [];
  const status: boolean[] = [];
  client.onText = (t) => got.push(t);
  client.onStatus = (s) => status.push(s);
  client.connect();
  socks[0].open();
  socks[0].emit('{"evt":"grip_close","t":1}');
  assert.deepEqual(got, ['{"evt":"grip_close","t":1}']);
  assert.deepEqual(status, [true]);
  client.close();
});

test("send only succeeds on an open socket", () => {
  const socks: FakeSocket[] = [];
  const client = new PipelineClient("ws://x/ws", () => {
    const s = new FakeSocket();
    socks.push(s);
    return s;
  }, 5);
  client.connect();
  assert.equal(client.send("hello"), false); // still CONNECTING
  socks[0].open();
  assert.equal(client.send("hello"), true);
  assert.deepEqual(socks[0].sent, ["hello"]);
  client.close();
});

test("reconnects after the server drops", async () => {
  const socks: FakeSocket[] = [];
  const client = new PipelineClient("ws://x/ws", () => {
    const s = new FakeSocket();
    socks.push(s);
    return s;
  }, 5);
  client.connect();
  socks[0].open();
  socks[0].close(); // server went away
  await wait(25);
  assert.ok(socks.length >= 2, "no reconnect attempt");
  assert.ok(client.reconnects >= 1);
  socks[socks.length - 1].open();
  assert.equal(client.send("back"), true);
  client.close();
});

test("close() stops the reconnect loop", async () => {
  const socks: FakeSocket[] = [];
  const client = new PipelineClient("ws://x/ws", () => {
    const s = new FakeSocket();
    socks.push(s);
    return s;
  }, 5);
  client.connect();
  socks[0].open();
  client.close();
  const count = socks.length;
  await wait(25);
  assert.equal(socks.length, count); // nothing new spawned
});
