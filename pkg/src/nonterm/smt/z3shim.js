#!/usr/bin/env node
// SMT-LIB 2 REPL backed by the z3 WebAssembly build (the `z3-solver` npm
// package).  Replies are only written for commands that produce output
// (check-sat, get-model, errors), mirroring `z3 -in`.
//
// The emscripten runtime inside z3-built.js reads file descriptor 0 directly
// (fs.readSync) and would race a stdin-based protocol for bytes, so commands
// and replies travel over dedicated pipe fds passed as argv:
//
//     node z3shim.js <command-fd> <reply-fd>
//
// Lines are buffered until parentheses balance, then evaluated in one call.

'use strict';

const fs = require('fs');
const readline = require('readline');
const { init } = require('z3-solver');

const cmdFd = Number(process.argv[2]);
const replyFd = Number(process.argv[3]);
if (!Number.isInteger(cmdFd) || !Number.isInteger(replyFd)) {
  process.stderr.write('usage: z3shim.js <command-fd> <reply-fd>\n');
  process.exit(2);
}

function reply(text) {
  fs.writeSync(replyFd, text);
}

function parenDelta(line) {
  let depth = 0;
  let inComment = false;
  for (const ch of line) {
    if (inComment) break;
    if (ch === ';') inComment = true;
    else if (ch === '(') depth += 1;
    else if (ch === ')') depth -= 1;
  }
  return depth;
}

init().then(async ({ Z3 }) => {
  const ctx = Z3.mk_context(Z3.mk_config());

  // String marshalling into the wasm heap is occasionally corrupted while the
  // heap is still growing (mostly right after startup).  A corrupted command
  // fails to parse before anything executes, so re-evaluating the identical
  // string is safe; z3 never produces these parse errors for the well-formed
  // commands this shim receives.
  const CORRUPTION = /unexpected character|unexpected end of file|invalid s-expression/;

  async function evalRobust(command) {
    let out = '';
    for (let attempt = 0; attempt < 8; attempt++) {
      try {
        out = await Z3.eval_smtlib2_string(ctx, command);
      } catch (err) {
        return `(error "${String(err).replace(/"/g, "'")}")\n`;
      }
      if (!CORRUPTION.test(out)) return out;
    }
    return out;
  }

  // Force allocation-heavy paths once so the heap reaches a stable size
  // before real commands arrive.
  await evalRobust(
    '(push 1)(declare-const warmup!a Int)(declare-const warmup!b Int)' +
    '(assert (>= (* warmup!a warmup!a warmup!b) (+ warmup!b 17)))' +
    '(assert (<= warmup!a (- 0 3)))(assert (>= warmup!b 2))(check-sat)(pop 1)');

  let buffered = '';
  let depth = 0;
  let chain = Promise.resolve();

  const input = fs.createReadStream(null, { fd: cmdFd });
  const rl = readline.createInterface({ input, terminal: false });

  rl.on('line', (line) => {
    buffered += line + '\n';
    depth += parenDelta(line);
    if (depth > 0) return;
    const command = buffered;
    buffered = '';
    depth = 0;
    if (/^\s*\(\s*exit\s*\)\s*$/.test(command)) {
      chain = chain.then(() => process.exit(0));
      return;
    }
    chain = chain
      .then(() => evalRobust(command))
      .then((out) => {
        if (out && out.length > 0) reply(out);
      });
  });

  rl.on('close', () => {
    chain = chain.then(() => process.exit(0));
  });
}).catch((err) => {
  process.stderr.write(`z3shim: failed to initialize z3-solver: ${err}\n`);
  process.exit(1);
});
