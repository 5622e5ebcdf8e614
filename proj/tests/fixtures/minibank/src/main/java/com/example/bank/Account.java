package com.example.bank;

public class Account {

	private final String owner;
	private long balance;

	public Account(String owner) {
		if (owner == null || owner.isEmpty()) {
			throw new IllegalArgumentException("owner is required");
		}
		this.owner = owner;
	}

	public String owner() {
		return owner;
	}

	public long balance() {
		return balance;
	}

	public void deposit(long amount) {
		if (amount <= 0) {
			throw new IllegalArgumentException("deposit must be positive: " + amount);
		}
		balance = checkedAdd(balance, amount);
	}

	public void withdraw(long amount) {
		long remaining = balance - amount;
		if (remaining < 0) {
			throw new IllegalStateException("insufficient funds for " + owner);
		}
		balance = remaining;
	}

	private static long checkedAdd(long a, long b) {
		long sum = a + b;
		if (sum < a) {
			throw new ArithmeticException("balance overflow");
		}
		return sum;
	}
}
